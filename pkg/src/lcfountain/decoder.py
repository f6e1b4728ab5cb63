"""Batched BP decoding of a trace: substitution, bounded BP and GE instances."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as ff
from .channel import Trace, segment_sums
from .errors import ConfigurationError, ContractViolation, CorruptionError
from .field import FieldSpec, OpCounter
from .kernels import BACKEND, structural_decode
from .lif import LIFTable, mask_of, users_of

INSTANCES = ("substitution", "bp", "ge")
_KIND = {"substitution": "o", "bp": "b", "ge": "star"}


@dataclass(frozen=True)
class DecoderConfig:
    instance: str = "ge"
    iterations: int | None = None  # bp only; defaults to L
    literal: bool = False  # bp only: depth recursion that ignores users known outright

    def __post_init__(self):
        if self.instance not in INSTANCES:
            raise ConfigurationError(f"decoder instance must be one of {INSTANCES}, got {self.instance!r}")
        if self.iterations is not None and self.iterations < 1:
            raise ConfigurationError("bp iterations must be >= 1")

    @property
    def lif_kind(self):
        return _KIND[self.instance]

    def table(self, matrices, q=2) -> LIFTable:
        return LIFTable(matrices, self.lif_kind, self.iterations, q, self.literal)

    def label(self):
        if self.instance == "bp":
            return f"bp({self.iterations or 'L'})"
        return self.instance


@dataclass
class DecodeReport:
    instance: str
    K: list
    decoded: list
    rounds: int
    releases_per_round: list
    decoded_per_round: list
    ops: int = 0
    backend: str = BACKEND

    @property
    def fractions(self):
        return [d / k if k else 1.0 for d, k in zip(self.decoded, self.K)]

    @property
    def total_fraction(self):
        return sum(self.decoded) / max(1, sum(self.K))

    def to_dict(self):
        return {
            "instance": self.instance,
            "K": list(self.K),
            "decoded": list(self.decoded),
            "fractions": self.fractions,
            "rounds": self.rounds,
            "releases_per_round": list(self.releases_per_round),
            "ops": self.ops,
            "backend": self.backend,
        }


@dataclass
class DecodeState:
    decoded: list  # per user, bool array over inputs
    known: np.ndarray  # per slot, mask of users whose coded packet is known
    released: np.ndarray  # per slot, mask of users released by the batch itself


@dataclass
class DecodeResult:
    report: DecodeReport
    state: DecodeState
    inputs: list | None = None  # per user (K_s, T); undecoded rows are zero
    events: dict = dc_field(default_factory=dict)


def _flatten(trace: Trace):
    L, N = trace.L, trace.N
    koff = np.concatenate([[0], np.cumsum(trace.K)]).astype(np.int64)
    degs = np.concatenate([np.diff(trace.nbr_ptr[s]) for s in range(L)]) if N else np.zeros(0, np.int64)
    cptr = np.concatenate([[0], np.cumsum(degs)]).astype(np.int64)
    cidx = np.concatenate([trace.nbr_idx[s] + koff[s] for s in range(L)]).astype(np.int64)
    owner = np.repeat(np.arange(L * N, dtype=np.int64), degs)
    order = np.argsort(cidx, kind="stable")
    iadj = owner[order]
    iptr = np.concatenate([[0], np.cumsum(np.bincount(cidx, minlength=int(koff[-1])))]).astype(np.int64)
    return koff, cptr, cidx, iptr, iadj


def decode(trace: Trace, config: DecoderConfig | None = None, payloads=True, counter: OpCounter | None = None,
           check=True) -> DecodeResult:
    """Decode every user's inputs from a trace.

    With ``payloads=False`` (or ``T == 0``) only the structure is decoded,
    which is what Monte Carlo runs need.
    """
    config = config or DecoderConfig()
    L, N = trace.L, trace.N
    q = trace.field.q
    lif = config.table(trace.matrices, q)
    table = lif.release_table() if trace.matrices else np.zeros((1, L, 1 << L), dtype=np.uint8)
    koff, cptr, cidx, iptr, iadj = _flatten(trace)
    dec, peel_ev, rel_ev, rel_rounds, dec_rounds = structural_decode(
        L, N, trace.types, table, cptr, cidx, iptr, iadj, int(koff[-1]))

    decoded = [dec[koff[s]:koff[s + 1]] for s in range(L)]
    released = np.zeros(N, dtype=np.int64)
    if len(rel_ev):
        np.bitwise_or.at(released, rel_ev[:, 0], 1 << rel_ev[:, 1])
    known = released.copy()
    if N:
        miss = np.add.reduceat((~dec[cidx]).astype(np.int64), cptr[:-1])
        for s in range(L):
            known |= np.where(miss[s * N:(s + 1) * N] == 0, 1 << s, 0)

    report = DecodeReport(
        config.label(), list(trace.K), [int(d.sum()) for d in decoded], len(rel_rounds),
        rel_rounds.tolist(), dec_rounds.tolist())
    state = DecodeState(decoded, known, released)
    result = DecodeResult(report, state, events={"peel": peel_ev, "release": rel_ev})
    if payloads and trace.T > 0:
        counter = counter or OpCounter()
        X = _replay(trace, config, dec_rounds, rel_rounds, peel_ev, rel_ev, koff, cptr, cidx, counter)
        result.inputs = [X[koff[s]:koff[s + 1]] for s in range(L)]
        if check:
            _consistency(trace, result, rel_ev)
        report.ops = counter.ops
    return result


class _Solver:
    """Caches the base-field combination w that isolates v_s given known rows."""

    def __init__(self, matrices, base):
        self.matrices, self.base = matrices, base
        self.cache = {}

    def weights(self, t, s, mask, counter):
        key = (t, s, mask)
        w = self.cache.get(key)
        if w is None:
            H = self.matrices[t]
            U = [r for r in range(H.shape[0]) if not mask >> r & 1]
            target = np.array([1 if r == s else 0 for r in U], dtype=np.int64)
            w = ff.solve_vector(H[U, :], target, self.base)
            if w is None:
                raise ContractViolation(f"known set {users_of(mask)} does not determine user {s}")
            counter.add(len(U) * H.shape[1] ** 2)
            self.cache[key] = w
        return w


def _replay(trace, config, dec_rounds, rel_rounds, peel_ev, rel_ev, koff, cptr, cidx, counter):
    field = trace.field
    L, N, T = trace.L, trace.N, trace.T
    X = np.zeros((int(koff[-1]), T), dtype=field.dtype)
    V = np.zeros((L * N, T), dtype=field.dtype)
    have_v = np.zeros(L * N, dtype=bool)
    solver = _Solver(trace.matrices, field.base)

    def coded_value(c):
        if not have_v[c]:
            nb = cidx[cptr[c]:cptr[c + 1]]
            V[c] = _sum_rows(field, X[nb])
            counter.add(len(nb) * T)
            have_v[c] = True
        return V[c]

    p0 = r0 = 0
    for p1, nrel in zip(dec_rounds, rel_rounds):
        for c, g in peel_ev[p0:p1]:
            nb = cidx[cptr[c]:cptr[c + 1]]
            others = nb[nb != g]
            val = V[c]
            if len(others):
                val = field.sub(val, _sum_rows(field, X[others]))
            X[g] = val
            counter.add(len(nb) * T)
        p0 = p1
        r1 = r0 + int(nrel)
        for i, s, mask in rel_ev[r0:r1]:
            t = trace.types[i]
            H = trace.matrices[t]
            w = solver.weights(t, int(s), int(mask), counter)
            u = trace.outputs[trace.out_ptr[i]:trace.out_ptr[i + 1]]
            acc = np.zeros(T, dtype=np.int64)
            for j in np.nonzero(w)[0]:
                y = u[j].astype(np.int64)
                for r in users_of(int(mask)):
                    if H[r, j]:
                        y = field.sub(y, field.mul(H[r, j], coded_value(r * N + int(i))))
                        counter.add(T)
                acc = field.add(acc, field.mul(w[j], y))
                counter.add(T)
            c = int(s) * N + int(i)
            V[c] = acc
            have_v[c] = True
        r0 = r1
    return X


def _sum_rows(field, rows):
    if field.q == 2:
        return np.bitwise_xor.reduce(rows, axis=0)
    return segment_sums(field, rows, np.array([0, len(rows)]))[0]


def _consistency(trace, result, rel_ev):
    """Every released payload must match its decoded inputs; full batches must re-encode."""
    field = trace.field
    L, N = trace.L, trace.N
    inputs = result.inputs
    V = [segment_sums(field, inputs[s][trace.nbr_idx[s]], trace.nbr_ptr[s]) if N else None for s in range(L)]
    full_known = np.zeros(N, dtype=np.int64)
    for s in range(L):
        dec = result.state.decoded[s]
        miss = np.add.reduceat((~dec[trace.nbr_idx[s]]).astype(np.int64), trace.nbr_ptr[s][:-1]) if N else []
        full_known |= np.where(np.asarray(miss) == 0, 1 << s, 0)
    everyone = (1 << L) - 1
    for t, H in enumerate(trace.matrices):
        idx = np.nonzero((trace.types == t) & (full_known == everyone))[0]
        if idx.size == 0:
            continue
        for j in range(H.shape[1]):
            acc = np.zeros((idx.size, trace.T), dtype=np.int64)
            for s in range(L):
                if H[s, j]:
                    acc = field.add(acc, field.mul(H[s, j], V[s][idx]))
            bad = np.nonzero(np.any(acc != trace.outputs[trace.out_ptr[idx] + j], axis=1))[0]
            if bad.size:
                raise CorruptionError("batch outputs disagree with decoded inputs", batch=int(idx[bad[0]]))


# -- single-batch resolution -------------------------------------------------


def resolve_batch(H, outputs, known: dict, families, field: FieldSpec | None = None, instance="ge",
                  counter: OpCounter | None = None, users=None):
    """Payloads of coded packets released by one batch.

    ``known`` maps user -> coded-packet payload.  ``families[s]`` is the LIF
    family of user s for this H.  ``users`` restricts the request; asking for
    a user whose family does not contain the known set is a contract
    violation.  Returns ``[(s, payload)]`` in user order.
    """
    field = field or FieldSpec()
    counter = counter or OpCounter()
    H = np.asarray(H, dtype=np.int64)
    L, B = H.shape
    outputs = np.asarray(outputs).reshape(B, -1)
    T = outputs.shape[1]
    kmask = mask_of(known)
    if users is None:
        users = [s for s in range(L) if s not in known and kmask in families[s]]
    else:
        for s in users:
            if s in known or kmask not in families[s]:
                raise ContractViolation(f"known set {sorted(known)} does not release user {s}")
    if not users:
        return []
    # substitute known packets into every output
    y = outputs.astype(np.int64)
    for r, v in known.items():
        for j in range(B):
            if H[r, j]:
                y[j] = field.sub(y[j], field.mul(H[r, j], np.asarray(v)))
                counter.add(T)
    U = [r for r in range(L) if r not in known]
    HU = H[U, :]
    if instance == "ge":
        vals = _ge_release(HU, U, y, field, counter)
    else:
        vals = _bp_release(HU, U, y, field, counter)
    out = []
    for s in users:
        if s not in vals:
            raise ContractViolation(f"user {s} not recoverable from this batch")
        out.append((s, vals[s]))
    return out


def _ge_release(HU, U, y, field, counter):
    Hh, Phi = ff.solve_reduced_column_echelon(HU, field.base, counter)
    vals = {}
    for j in range(Hh.shape[1]):
        nz = np.nonzero(Hh[:, j])[0]
        if len(nz) != 1:
            continue
        acc = np.zeros(y.shape[1], dtype=np.int64)
        for k in np.nonzero(Phi[:, j])[0]:
            acc = field.add(acc, field.mul(Phi[k, j], y[k]))
            counter.add(y.shape[1])
        s = U[nz[0]]
        vals[s] = field.div(acc, Hh[nz[0], j])
    return vals


def _bp_release(HU, U, y, field, counter):
    """Repeatedly read off single-unknown columns and substitute back."""
    HU = HU.copy()
    y = y.copy()
    alive = list(range(len(U)))
    vals = {}
    progress = True
    while progress:
        progress = False
        for j in range(HU.shape[1]):
            nz = [r for r in alive if HU[r, j]]
            if len(nz) != 1:
                continue
            r = nz[0]
            v = field.div(y[j], HU[r, j])
            vals[U[r]] = v
            counter.add(y.shape[1])
            alive.remove(r)
            for jj in range(HU.shape[1]):
                if HU[r, jj]:
                    y[jj] = field.sub(y[jj], field.mul(HU[r, jj], v))
                    HU[r, jj] = 0
                    counter.add(y.shape[1])
            progress = True
    return vals


def families_for(H, config: DecoderConfig | None = None, q=2):
    config = config or DecoderConfig()
    return config.table([H], q).families[0]


# -- oracle ------------------------------------------------------------------


def whole_system_ge_reference(trace: Trace):
    """Inputs determined by the joint linear system of every output in the trace."""
    L, N = trace.L, trace.N
    total = sum(trace.K)
    if total > 64:
        raise ConfigurationError("whole-system reference is for sum K <= 64")
    base = trace.field.base
    koff = np.concatenate([[0], np.cumsum(trace.K)])
    rows = []
    for i in range(N):
        H = trace.H(i)
        for j in range(H.shape[1]):
            row = np.zeros(total, dtype=np.int64)
            for s in range(L):
                if H[s, j]:
                    for k in trace.neighbors(s, i):
                        row[koff[s] + k] = (row[koff[s] + k] + H[s, j]) % base.q
            rows.append(row)
    det = np.zeros(total, dtype=bool)
    if rows:
        R, _, pivots = ff.row_reduce(np.array(rows), base)
        for n, c in enumerate(pivots):
            if np.count_nonzero(R[n]) == 1:
                det[c] = True
    return [det[koff[s]:koff[s + 1]] for s in range(L)]
