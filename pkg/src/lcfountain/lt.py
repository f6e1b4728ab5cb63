"""Single-user LT machinery: degree distributions, encoding, peeling."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError, CorruptionError
from .field import FieldSpec


class DegreeDistribution:
    """Probability vector over degrees ``1..D``.

    ``probs[i]`` is the probability of degree ``i + 1``.  ``tol`` bounds the
    allowed deviation of the total mass from one; distributions rounded
    to four decimals need a looser value than the default.
    """

    def __init__(self, probs, tol=1e-9):
        p = np.asarray(probs, dtype=float).ravel()
        if p.size == 0:
            raise ConfigurationError("degree distribution needs at least one degree")
        if np.any(p < 0):
            raise ConfigurationError("negative degree probability")
        if abs(p.sum() - 1.0) > tol:
            raise ConfigurationError(f"degree probabilities sum to {p.sum():.12g}, not 1")
        nz = np.nonzero(p)[0]
        self.probs = p[: nz[-1] + 1].copy() if nz.size else p[:1].copy()
        self.probs.flags.writeable = False
        self.tol = tol

    @classmethod
    def from_pairs(cls, pairs, tol=1e-9):
        pairs = dict(pairs.items()) if isinstance(pairs, dict) else dict(pairs)
        D = max(int(d) for d in pairs)
        p = np.zeros(D)
        for d, v in pairs.items():
            if int(d) < 1:
                raise ConfigurationError(f"degree {d} < 1")
            p[int(d) - 1] += float(v)
        return cls(p, tol=tol)

    @classmethod
    def point(cls, degree):
        return cls.from_pairs({degree: 1.0})

    @property
    def max_degree(self) -> int:
        return len(self.probs)

    def as_pairs(self):
        return [(i + 1, float(v)) for i, v in enumerate(self.probs) if v > 0]

    def normalized(self) -> "DegreeDistribution":
        return DegreeDistribution(self.probs / self.probs.sum())

    def __call__(self, x):
        return poly_eval(self, x)

    def derivative(self, x):
        return poly_eval(self, x, derivative=True)

    def mean(self) -> float:
        return float(np.dot(np.arange(1, self.max_degree + 1), self.probs))

    def cdf(self):
        c = np.cumsum(self.probs)
        return c / c[-1]

    def sample(self, rng, size):
        """Inverse-CDF sampling on the cumulative table."""
        u = rng.random(size)
        return np.searchsorted(self.cdf(), u, side="right") + 1

    def schedule(self, n, rng):
        """Deterministic degree schedule: exact largest-remainder counts, shuffled."""
        counts = largest_remainder(self.probs / self.probs.sum(), n)
        degs = np.repeat(np.arange(1, self.max_degree + 1), counts)
        rng.shuffle(degs)
        return degs

    def __eq__(self, other):
        return isinstance(other, DegreeDistribution) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        terms = ", ".join(f"{d}: {p:.4g}" for d, p in self.as_pairs())
        return f"DegreeDistribution({{{terms}}})"


def poly_eval(psi: DegreeDistribution, x, derivative=False):
    """``sum_i psi[i] x^i``, or its derivative ``sum_i i psi[i] x^(i-1)``."""
    p = psi.probs
    if np.ndim(x) == 0:
        # plain floats: numpy scalar arithmetic is far slower in this loop
        xf, acc = float(x), 0.0
        if derivative:
            for i in range(len(p), 0, -1):
                acc = acc * xf + i * float(p[i - 1])
            return acc
        for i in range(len(p), 0, -1):
            acc = acc * xf + float(p[i - 1])
        return acc * xf
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    if derivative:
        for i in range(len(p), 0, -1):
            acc = acc * x + i * p[i - 1]
        return acc
    for i in range(len(p), 0, -1):
        acc = acc * x + p[i - 1]
    return acc * x


def largest_remainder(weights, n):
    weights = np.asarray(weights, dtype=float)
    raw = weights * n
    base = np.floor(raw).astype(np.int64)
    short = int(n - base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def floyd_sample(K, d, rng):
    """``d`` distinct indices from ``range(K)``, uniform, via Floyd's algorithm."""
    chosen = set()
    out = []
    for j in range(K - d, K):
        t = int(rng.integers(0, j + 1))
        pick = j if t in chosen else t
        chosen.add(pick)
        out.append(pick)
    return out


@dataclass
class CodedPacket:
    owner: int
    neighbors: tuple
    payload: np.ndarray | None = None


def encode(inputs, psi: DegreeDistribution, rng, owner=0, field: FieldSpec | None = None, K=None):
    """One LT coded packet.  ``inputs`` is a ``(K, T)`` array or None for structure only."""
    if inputs is not None:
        K = len(inputs)
    if K is None:
        raise ConfigurationError("need inputs or K")
    if K < psi.max_degree:
        raise ConfigurationError(f"K={K} is smaller than the maximum degree {psi.max_degree}")
    d = int(psi.sample(rng, 1)[0])
    nbrs = tuple(sorted(floyd_sample(K, d, rng)))
    payload = None
    if inputs is not None:
        field = field or FieldSpec()
        payload = np.zeros(inputs.shape[1], dtype=inputs.dtype)
        for k in nbrs:
            payload = field.add(payload, inputs[k])
    return CodedPacket(owner, nbrs, payload)


@dataclass
class _Residual:
    undecoded: set
    payload: np.ndarray | None
    origin: int


@dataclass
class PeelingState:
    """Decoding state of one user's LT code under peeling."""

    K: int
    owner: int = 0
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    decoded: np.ndarray = None
    values: dict = dc_field(default_factory=dict)
    residuals: list = dc_field(default_factory=list)
    steps: int = 0

    def __post_init__(self):
        if self.decoded is None:
            self.decoded = np.zeros(self.K, dtype=bool)

    @property
    def decoded_count(self) -> int:
        return int(self.decoded.sum())


def peel(state: PeelingState, new_checks, corrupt_check=True) -> PeelingState:
    """Add checks and peel to exhaustion with a FIFO queue of degree-one checks."""
    field = state.field
    by_input = {}
    for res in state.residuals:
        for k in res.undecoded:
            by_input.setdefault(k, []).append(res)
    queue = deque(r for r in state.residuals if len(r.undecoded) == 1)
    for n, cp in enumerate(new_checks):
        if cp.owner != state.owner:
            raise ConfigurationError(f"check of user {cp.owner} fed to user {state.owner}")
        payload = None if cp.payload is None else np.array(cp.payload, copy=True)
        und = set()
        for k in cp.neighbors:
            if state.decoded[k]:
                if payload is not None:
                    payload = field.sub(payload, state.values[k])
            else:
                und.add(k)
        res = _Residual(und, payload, len(state.residuals))
        if not und:
            _check_zero(res, corrupt_check)
            continue
        state.residuals.append(res)
        for k in und:
            by_input.setdefault(k, []).append(res)
        if len(und) == 1:
            queue.append(res)
    while queue:
        res = queue.popleft()
        if len(res.undecoded) != 1:
            continue
        (k,) = res.undecoded
        state.decoded[k] = True
        state.steps += 1
        if res.payload is not None:
            state.values[k] = res.payload
        for other in by_input.pop(k, ()):
            other.undecoded.discard(k)
            if other.payload is not None and other is not res:
                other.payload = field.sub(other.payload, state.values[k])
            if other is not res and not other.undecoded:
                _check_zero(other, corrupt_check)
            elif len(other.undecoded) == 1:
                queue.append(other)
    state.residuals = [r for r in state.residuals if r.undecoded]
    return state


def _check_zero(res, enabled):
    if enabled and res.payload is not None and np.any(res.payload != 0):
        raise CorruptionError(f"check {res.origin} disagrees with decoded inputs")
