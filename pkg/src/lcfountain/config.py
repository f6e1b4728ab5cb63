"""Experiment configuration: one versioned YAML file per experiment.

Schema (version 1)::

    version: 1
    field: {q: 2, m: 8}
    users: [A, B]                 # labels; L = len(users)
    K: [10000, 10000]             # or a single int for every user
    T: 0                          # payload symbols per packet; 0 = structure only
    N: 21277                      # slots, or give `rate` (R_s / beta) instead
    rate: 0.47
    slots: exact                  # exact | iid slot-type sampling
    channel:
      profile: lc2                # lc2 | lc3 | matrices
      alpha: {A: 0.25, B: 0.25, AB: 0.5}
      bar_alpha: 0.0              # lc3 only; scalar (split evenly) or per user
      # profile: matrices
      # matrices: [{rows: ["10", "01"], p: 1.0}]
    psi:                          # one entry per user, or a single shared entry
      - {reference: B}
      - {pairs: [[1, 0.05], [2, 0.5], [3, 0.45]]}
      - {file: psi_c.yaml}        # YAML list of [degree, prob] pairs
    decoder: {instance: ge, iterations: null}
    analysis: {C: [0.4907, 0.4907], kind: star, points: [[0.5, 0.5]]}
    optimizer: {eta: 0.98, optimize: [A, B], fixed_theta: {}, kind: star,
                t_max: 20, M: 20, restarts: 20}
    seed: 1
    trials: 50
    target: 0.98                  # simulate: count trials reaching this fraction
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .channel import DEFAULT_LABELS, TransferMatrixDistribution, distribution_from_alphas
from .decoder import DecoderConfig
from .errors import ConfigurationError
from .field import FieldSpec
from .lt import DegreeDistribution
from .profiles import FOUR_DECIMAL_TOL, reference_psi_a, reference_psi_b

CONFIG_VERSION = 1
_TOP_KEYS = {"version", "field", "users", "K", "T", "N", "rate", "slots", "channel", "psi", "decoder",
             "analysis", "optimizer", "seed", "trials", "target"}


@dataclass
class ExperimentConfig:
    raw: dict
    field: FieldSpec
    labels: list
    K: list
    T: int
    N: int | None
    slots: str
    g: TransferMatrixDistribution | None
    psis: list | None
    decoder: DecoderConfig
    analysis: dict
    optimizer: dict
    seed: int
    trials: int
    target: float | None

    @property
    def L(self):
        return len(self.labels)

    @property
    def digest(self) -> str:
        return config_digest(self.raw)

    def users(self):
        return list(zip(self.K, self.psis))

    def analysis_c(self):
        """Per-user C/beta for the analysis; ``auto`` means K_s / (N beta)."""
        c = self.analysis.get("C")
        if c is None:
            return None
        if c == "auto":
            if self.N is None:
                raise ConfigurationError("analysis.C = auto needs N or rate")
            return [k / (self.N * self.g.beta()) for k in self.K]
        c = _per_user(c, self.L, "analysis.C")
        return [float(v) for v in c]


def config_digest(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def _per_user(value, L, name):
    if isinstance(value, (list, tuple)):
        if len(value) != L:
            raise ConfigurationError(f"{name} has {len(value)} entries for {L} users")
        return list(value)
    return [value] * L


def _label_set(key, labels):
    """``"AB"`` or ``"A+B"`` or ``[A, B]`` -> sorted tuple of user indices."""
    if isinstance(key, (list, tuple)):
        parts = [str(k) for k in key]
    else:
        key = str(key)
        parts = key.split("+") if "+" in key else list(key)
    try:
        return tuple(sorted(labels.index(p) for p in parts))
    except ValueError:
        raise ConfigurationError(f"unknown user in {key!r}; users are {labels}") from None


def build_channel(spec: dict, labels, q=2) -> TransferMatrixDistribution:
    if not isinstance(spec, dict):
        raise ConfigurationError("channel must be a mapping")
    profile = spec.get("profile", "matrices")
    L = len(labels)
    if profile in ("lc2", "lc3"):
        if L != int(profile[-1]):
            raise ConfigurationError(f"profile {profile} needs {profile[-1]} users, config has {L}")
        if q != 2:
            raise ConfigurationError("named profiles are binary (q = 2)")
        alpha = {_label_set(k, labels): float(v) for k, v in (spec.get("alpha") or {}).items()}
        bar = spec.get("bar_alpha", 0.0)
        if isinstance(bar, dict):
            bar = tuple(float(bar.get(lab, 0.0)) for lab in labels)
        elif isinstance(bar, (list, tuple)):
            bar = tuple(float(b) for b in _per_user(bar, L, "bar_alpha"))
        else:
            bar = (float(bar) / L,) * L
        if profile == "lc2" and any(bar):
            raise ConfigurationError("bar_alpha only applies to lc3")
        return distribution_from_alphas(L, alpha, bar if profile == "lc3" else None, q=q)
    if profile == "matrices":
        items = spec.get("matrices")
        if not items:
            raise ConfigurationError("channel.matrices is empty")
        try:
            g = TransferMatrixDistribution.from_records(items, q=q, L=L)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad channel.matrices entry: {exc}") from None
        if g.L != L:
            raise ConfigurationError(f"transfer matrices have {g.L} rows but there are {L} users")
        return g
    raise ConfigurationError(f"unknown channel profile {profile!r}")


def build_psi(spec, base_dir: Path | None = None) -> DegreeDistribution:
    if isinstance(spec, dict) and "reference" in spec:
        which = str(spec["reference"]).upper()
        if which not in ("A", "B"):
            raise ConfigurationError("reference distributions are A and B")
        return reference_psi_a() if which == "A" else reference_psi_b()
    if isinstance(spec, dict) and "file" in spec:
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            pairs = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read degree distribution {path}: {exc}") from None
        return _from_pairs(pairs, spec.get("tol"))
    if isinstance(spec, dict) and "pairs" in spec:
        return _from_pairs(spec["pairs"], spec.get("tol"))
    if isinstance(spec, list):
        return _from_pairs(spec, None)
    raise ConfigurationError(f"cannot read degree distribution from {spec!r}")


def _from_pairs(pairs, tol):
    try:
        pairs = [(int(d), float(p)) for d, p in pairs]
    except (TypeError, ValueError):
        raise ConfigurationError("degree distribution must be a list of [degree, prob] pairs") from None
    if not pairs or min(d for d, _ in pairs) < 1:
        raise ConfigurationError("degrees start at 1")
    probs = [0.0] * max(d for d, _ in pairs)
    for d, p in pairs:
        probs[d - 1] += p
    return DegreeDistribution(probs, tol=float(tol) if tol is not None else FOUR_DECIMAL_TOL)


def parse_config(raw: dict, base_dir: Path | None = None, need=()) -> ExperimentConfig:
    """Validate a raw mapping.  ``need`` names sections the caller requires."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"config version {version!r} not supported (expected {CONFIG_VERSION})")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    f = raw.get("field") or {}
    field = FieldSpec(int(f.get("q", 2)), int(f.get("m", 8)))
    labels = [str(u) for u in raw.get("users") or DEFAULT_LABELS[: len(_listify(raw.get("K", [])))]]
    if not labels:
        raise ConfigurationError("config needs users (labels) or a per-user K list")
    if len(set(labels)) != len(labels):
        raise ConfigurationError("user labels must be distinct")
    L = len(labels)

    g = build_channel(raw["channel"], labels, field.q) if "channel" in raw else None
    if "channel" in need and g is None:
        raise ConfigurationError("config needs a channel section")

    K = [int(k) for k in _per_user(raw.get("K", 0), L, "K")]
    T = int(raw.get("T", 0))
    if T < 0:
        raise ConfigurationError("T must be >= 0")

    N = raw.get("N")
    if N is None and raw.get("rate") is not None:
        if g is None:
            raise ConfigurationError("rate needs a channel to fix beta")
        rates = [float(r) for r in _per_user(raw["rate"], L, "rate")]
        if any(r <= 0 for r in rates):
            raise ConfigurationError("rates must be positive")
        N = max(math.ceil(k / (r * g.beta()) - 1e-9) for k, r in zip(K, rates))
    N = int(N) if N is not None else None
    if "N" in need and (N is None or N < 1):
        raise ConfigurationError("config needs N >= 1 (or rate)")

    psis = None
    if "psi" in raw:
        specs = raw["psi"]
        if isinstance(specs, dict) or (isinstance(specs, list) and specs and isinstance(specs[0], (list, tuple))
                                       and len(specs[0]) == 2 and not isinstance(specs[0][0], (list, dict))):
            specs = [specs] * L
        if len(specs) != L:
            raise ConfigurationError(f"psi has {len(specs)} entries for {L} users")
        psis = [build_psi(s, base_dir) for s in specs]
    if "psi" in need and psis is None:
        raise ConfigurationError("config needs a psi section")
    if psis is not None and "K" in need:
        for lab, k, p in zip(labels, K, psis):
            if k < p.max_degree:
                raise ConfigurationError(f"user {lab}: K={k} below the maximum degree {p.max_degree}")

    dec = raw.get("decoder") or {}
    decoder = DecoderConfig(dec.get("instance", "ge"), dec.get("iterations"), bool(dec.get("literal", False)))
    slots = raw.get("slots", "exact")
    if slots not in ("exact", "iid"):
        raise ConfigurationError("slots must be exact or iid")
    seed = int(raw.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
    trials = int(raw.get("trials", 1))
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    target = raw.get("target")
    return ExperimentConfig(raw, field, labels, K, T, N, slots, g, psis, decoder, dict(raw.get("analysis") or {}),
                            dict(raw.get("optimizer") or {}), seed, trials,
                            float(target) if target is not None else None)


def _listify(v):
    return v if isinstance(v, list) else []


def load_config(path, need=(), overrides=None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    raw = dict(raw or {})
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    try:
        return parse_config(raw, path.parent, need)
    except ConfigurationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from None
