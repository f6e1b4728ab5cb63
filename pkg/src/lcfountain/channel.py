"""Linear multiple-access channel: transfer matrices, the distribution g, batches."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations, product

import numpy as np

from . import field as ff
from .errors import ConfigurationError, DegenerateChannelError
from .field import FieldSpec
from .lt import DegreeDistribution, largest_remainder

DEFAULT_LABELS = "ABCDEFGHIJKLMNOP"


def _cols(*columns):
    return np.array(columns, dtype=np.int64).T


_LC2 = [
    _cols([1, 0]),
    _cols([0, 1]),
    _cols([1, 1]),
    _cols([1, 0], [0, 1]),
]

_LC3 = [
    _cols([1, 0, 0]),
    _cols([0, 1, 0]),
    _cols([0, 0, 1]),
    _cols([1, 0, 0], [0, 1, 0]),
    _cols([1, 0, 0], [0, 0, 1]),
    _cols([0, 1, 0], [0, 0, 1]),
    _cols([1, 0, 0], [0, 1, 0], [0, 0, 1]),
    _cols([1, 1, 0]),
    _cols([1, 0, 1]),
    _cols([0, 1, 1]),
    _cols([1, 1, 1]),
    _cols([1, 0, 1], [0, 1, 0]),  # H12: A+C, B
    _cols([1, 0, 0], [0, 1, 1]),  # H13: A, B+C
    _cols([1, 1, 0], [0, 0, 1]),  # H14: A+B, C
    _cols([1, 0, 1], [0, 1, 1]),  # H15: A+C, B+C
    _cols([1, 0, 1], [1, 1, 0]),  # H16: A+C, A+B
    _cols([1, 1, 0], [0, 1, 1]),  # H17: A+B, B+C
]


def catalog(L: int, q: int = 2):
    """Transfer matrices for L users over GF(q).

    L = 2 and L = 3 over GF(2) give the named lists ``H_1..H_4`` and
    ``H_1..H_17`` (index 0 is ``H_1``).  Anything else enumerates one reduced
    column echelon representative per nonzero subspace of GF(q)^L.
    """
    if q == 2 and L == 2:
        return [H.copy() for H in _LC2]
    if q == 2 and L == 3:
        return [H.copy() for H in _LC3]
    return _echelon_catalog(L, q)


def _echelon_catalog(L, q):
    out = []
    for B in range(1, L + 1):
        for pivots in combinations(range(L), B):
            free = [(j, r) for j, p in enumerate(pivots) for r in range(p + 1, L) if r not in pivots]
            for vals in product(range(q), repeat=len(free)):
                H = np.zeros((L, B), dtype=np.int64)
                for j, p in enumerate(pivots):
                    H[p, j] = 1
                for (j, r), v in zip(free, vals):
                    H[r, j] = v
                out.append(H)
    return out


def matrix_key(H) -> tuple:
    H = np.asarray(H, dtype=np.int64)
    return (H.shape, H.tobytes())


def matrix_to_rows(H):
    return ["".join(str(int(v)) for v in row) for row in np.asarray(H)]


class TransferMatrixDistribution:
    """Support of g: ``(H, g(H))`` pairs; leftover mass is the empty outcome."""

    def __init__(self, support, L=None, q=2, names=None, tol=1e-9):
        mats, probs = [], []
        for H, p in support:
            H = ff.as_matrix(H)
            mats.append(H)
            probs.append(float(p))
        if L is None:
            if not mats:
                raise ConfigurationError("cannot infer L from an empty support")
            L = mats[0].shape[0]
        base = FieldSpec(q, 1)
        for H, p in zip(mats, probs):
            if H.shape[0] != L:
                raise ConfigurationError(f"matrix with {H.shape[0]} rows in an L={L} distribution")
            if not 1 <= H.shape[1] <= L:
                raise ConfigurationError("transfer matrices need 1..L columns")
            if H.min() < 0 or H.max() >= q:
                raise ConfigurationError("transfer matrix entries outside GF(q)")
            if ff.rank(H, base) != H.shape[1]:
                raise ConfigurationError(f"transfer matrix {matrix_to_rows(H)} is not full column rank")
            if p < 0:
                raise ConfigurationError("negative probability in g")
        total = sum(probs)
        if total > 1 + tol:
            raise ConfigurationError(f"g sums to {total} > 1")
        self.L, self.q = int(L), int(q)
        self.matrices = mats
        self.probs = np.array(probs, dtype=float)
        self.names = list(names) if names is not None else [None] * len(mats)
        self.residual = max(0.0, 1.0 - total)

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(zip(self.matrices, self.probs))

    @classmethod
    def from_catalog(cls, L, weights, q=2):
        """``weights`` maps 1-based catalog index to g(H_i)."""
        cat = catalog(L, q)
        support, names = [], []
        for i, p in sorted(weights.items()):
            if p > 0:
                support.append((cat[int(i) - 1], p))
                names.append(f"H{int(i)}")
        return cls(support, L=L, q=q, names=names)

    def beta(self) -> float:
        base = FieldSpec(self.q, 1)
        return float(sum(p * ff.rank(H, base) for H, p in self))

    def to_records(self):
        return [{"rows": matrix_to_rows(H), "p": float(p)} for H, p in self]

    @classmethod
    def from_records(cls, records, q=2, L=None):
        return cls([(ff.as_matrix(r["rows"]), r["p"]) for r in records], q=q, L=L)


@dataclass
class SystemProfile:
    L: int
    labels: str
    beta: float
    alpha: dict = dc_field(default_factory=dict)  # frozenset of user indices -> alpha_S
    bar_alpha: tuple = ()
    non_autonomous: float = 0.0

    @property
    def bar(self) -> float:
        return float(sum(self.bar_alpha))

    def a(self, *users) -> float:
        """alpha for the set of users, e.g. ``profile.a(0, 1)`` is alpha_{A+B}."""
        return self.alpha.get(frozenset(users), 0.0)

    def identity_residual(self) -> float:
        return sum(self.alpha.values()) + 2 * self.bar - 1.0


def _classify(H, base):
    """Autonomous column supports of H, or the shared user of a 2-column non-autonomous batch."""
    Hh, _ = ff.solve_reduced_column_echelon(H, base)
    cols = [Hh[:, j] for j in range(Hh.shape[1]) if np.any(Hh[:, j])]
    supports = [frozenset(np.nonzero(c)[0].tolist()) for c in cols]
    seen = set()
    disjoint = True
    for s in supports:
        if seen & s:
            disjoint = False
        seen |= s
    if disjoint:
        return supports, None
    if H.shape[1] == 2:
        rows_both = [r for r in range(H.shape[0]) if H[r, 0] and H[r, 1]]
        if len(rows_both) == 1:
            return None, rows_both[0]
    return None, -1


def derive_profile(g: TransferMatrixDistribution, labels=None) -> SystemProfile:
    """beta_L and the alpha quantities (fractions of the n = beta_L N outputs)."""
    beta = g.beta()
    if beta <= 0:
        raise DegenerateChannelError("beta_L = 0: the channel never delivers anything")
    labels = labels or DEFAULT_LABELS[: g.L]
    base = FieldSpec(g.q, 1)
    alpha = {}
    bar = [0.0] * g.L
    other = 0.0
    for H, p in g:
        supports, shared = _classify(H, base)
        if supports is not None:
            for S in supports:
                alpha[S] = alpha.get(S, 0.0) + p / beta
        elif shared is not None and shared >= 0:
            bar[shared] += p / beta
        else:
            other += p * H.shape[1] / beta
    return SystemProfile(g.L, labels, beta, alpha, tuple(bar), other)


def distribution_from_alphas(L, alpha, bar_alpha=None, q=2) -> TransferMatrixDistribution:
    """A g with beta_L = 1 realising the given alpha (and per-user bar-alpha) values.

    ``alpha`` maps tuples/frozensets of user indices to alpha_S.  Non-autonomous
    mass for user s sits on the matrix whose two columns share user s
    (H15 for C, H16 for A, H17 for B when L = 3).
    """
    if q != 2 or L not in (2, 3):
        raise ConfigurationError("alpha parameterisation exists for binary L=2 and L=3 only")
    support, names = [], []
    for S, a in alpha.items():
        S = tuple(sorted(S))
        if a <= 0:
            continue
        H = np.zeros((L, 1), dtype=np.int64)
        H[list(S), 0] = 1
        support.append((H, a))
        names.append("+".join(DEFAULT_LABELS[s] for s in S))
    if bar_alpha is not None:
        if L != 3:
            raise ConfigurationError("non-autonomous batches need L = 3")
        shared_to_h = {2: 14, 0: 15, 1: 16}
        for s, b in enumerate(bar_alpha):
            if b > 0:
                support.append((_LC3[shared_to_h[s]].copy(), b))
                names.append(f"H{shared_to_h[s] + 1}")
    total_rank = sum(p * ff.rank(H, FieldSpec(q, 1)) for H, p in support)
    if abs(total_rank - 1.0) > 1e-9:
        raise ConfigurationError(f"alphas must satisfy sum(alpha) + 2 sum(bar) = 1, got {total_rank}")
    return TransferMatrixDistribution(support, L=L, q=q, names=names)


def rate_region_bounds(g: TransferMatrixDistribution):
    """``[(S, sum_H g(H) rk(H^S))]`` for every nonempty subset S of users."""
    base = FieldSpec(g.q, 1)
    out = []
    for size in range(1, g.L + 1):
        for S in combinations(range(g.L), size):
            val = sum(p * ff.rank(H[list(S), :], base) for H, p in g)
            out.append((S, float(val)))
    return out


# -- batch generation --------------------------------------------------------


@dataclass
class Batch:
    """One timeslot as seen by the decoder."""

    index: int
    H: np.ndarray  # L x B; B == 0 when nothing was decoded
    neighbors: list  # per user, tuple of input indices of the embedded coded packet
    outputs: np.ndarray  # B x T


class Trace:
    """A whole block of N batches in flat-array form.

    ``types[i]`` indexes ``matrices`` (``-1`` for an empty slot).  For user s
    the neighbors of the coded packet in slot i are
    ``nbr_idx[s][nbr_ptr[s][i]:nbr_ptr[s][i+1]]``.  Outputs of slot i are rows
    ``out_ptr[i]:out_ptr[i+1]`` of ``outputs``.
    """

    def __init__(self, field, L, T, K, matrices, types, nbr_ptr, nbr_idx, outputs=None, out_ptr=None):
        self.field = field
        self.L, self.T = int(L), int(T)
        self.K = [int(k) for k in K]
        self.matrices = [np.asarray(H, dtype=np.int64) for H in matrices]
        self.types = np.asarray(types, dtype=np.int64)
        self.nbr_ptr = [np.asarray(p, dtype=np.int64) for p in nbr_ptr]
        self.nbr_idx = [np.asarray(x, dtype=np.int64) for x in nbr_idx]
        if out_ptr is None:
            widths = np.array([0 if t < 0 else self.matrices[t].shape[1] for t in self.types])
            out_ptr = np.concatenate([[0], np.cumsum(widths)])
        self.out_ptr = np.asarray(out_ptr, dtype=np.int64)
        if outputs is None:
            outputs = np.zeros((int(self.out_ptr[-1]), self.T), dtype=field.dtype)
        self.outputs = outputs

    @classmethod
    def from_batches(cls, field, K, batches, T=None):
        """Assemble a trace from ``(H, neighbors per user[, outputs])`` tuples."""
        L = len(K)
        mats, keys, types, outs = [], {}, [], []
        nbrs = [[] for _ in range(L)]
        for b in batches:
            H = np.asarray(b[0], dtype=np.int64).reshape(L, -1)
            if H.shape[1] == 0:
                types.append(-1)
            else:
                key = matrix_key(H)
                if key not in keys:
                    keys[key] = len(mats)
                    mats.append(H)
                types.append(keys[key])
            for s in range(L):
                nb = [int(k) for k in b[1][s]]
                if not nb or len(set(nb)) != len(nb) or min(nb) < 0 or max(nb) >= K[s]:
                    raise ConfigurationError(f"bad neighbor list {nb} for user {s}")
                nbrs[s].append(nb)
            if len(b) > 2 and b[2] is not None:
                outs.append(np.asarray(b[2], dtype=field.dtype).reshape(H.shape[1], -1))
            else:
                outs.append(None)
        if T is None:
            T = next((o.shape[1] for o in outs if o is not None and o.size), 0)
        ptr = [np.concatenate([[0], np.cumsum([len(x) for x in nb])]) for nb in nbrs]
        idx = [np.array([k for x in nb for k in x], dtype=np.int64) for nb in nbrs]
        trace = cls(field, L, T, K, mats, types, ptr, idx)
        for i, o in enumerate(outs):
            if o is not None and o.size:
                trace.outputs[trace.out_ptr[i]:trace.out_ptr[i + 1]] = o
        return trace

    @property
    def N(self) -> int:
        return len(self.types)

    def H(self, i):
        t = self.types[i]
        return np.zeros((self.L, 0), dtype=np.int64) if t < 0 else self.matrices[t]

    def neighbors(self, s, i):
        return self.nbr_idx[s][self.nbr_ptr[s][i]:self.nbr_ptr[s][i + 1]]

    def batch(self, i) -> Batch:
        return Batch(
            i,
            self.H(i),
            [tuple(int(k) for k in self.neighbors(s, i)) for s in range(self.L)],
            self.outputs[self.out_ptr[i]:self.out_ptr[i + 1]],
        )

    def batches(self):
        return [self.batch(i) for i in range(self.N)]

    def type_histogram(self):
        return np.bincount(self.types[self.types >= 0], minlength=len(self.matrices))


def segment_sums(field: FieldSpec, rows, ptr):
    """Field sum of ``rows[ptr[i]:ptr[i+1]]`` for each i; segments must be non-empty."""
    if rows.shape[0] == 0 or rows.shape[1] == 0:
        return np.zeros((len(ptr) - 1, rows.shape[1]), dtype=field.dtype)
    starts = ptr[:-1]
    if field.q == 2:
        return np.bitwise_xor.reduceat(rows, starts, axis=0)
    from .field import _tables
    t = _tables(field.q, field.m)
    dig = t.digits[rows.astype(np.int64)]
    summed = np.add.reduceat(dig, starts, axis=0) % field.q
    return t.compose(summed).astype(field.dtype)


def sample_slot_types(g: TransferMatrixDistribution, N, mode, rng):
    weights = np.append(g.probs, g.residual)
    if mode == "exact":
        counts = largest_remainder(weights / weights.sum(), N)
        types = np.repeat(np.arange(len(weights)), counts)
        rng.shuffle(types)
    elif mode == "iid":
        types = rng.choice(len(weights), size=N, p=weights / weights.sum())
    else:
        raise ConfigurationError(f"unknown slot mode {mode!r}")
    types = types.astype(np.int64)
    types[types == len(g)] = -1
    return types


def generate_batches(users, g: TransferMatrixDistribution, N, rng, mode="exact",
                     field: FieldSpec | None = None, T=0, inputs=None, degree_mode="iid"):
    """Encode one coded packet per user per slot and pass it through the channel.

    ``users`` is a list of ``(K_s, DegreeDistribution)``.  ``inputs`` (list of
    ``(K_s, T)`` arrays) is optional; random payloads are drawn when ``T > 0``
    and no inputs are given.  Returns ``(trace, inputs)``.
    """
    from .kernels import floyd_batch

    field = field or FieldSpec()
    if len(users) != g.L:
        raise ConfigurationError(f"{len(users)} users but g has L={g.L}")
    types = sample_slot_types(g, N, mode, rng)
    nbr_ptr, nbr_idx = [], []
    for K, psi in users:
        if K < psi.max_degree:
            raise ConfigurationError(f"K={K} is smaller than the maximum degree {psi.max_degree}")
        degs = psi.schedule(N, rng) if degree_mode == "schedule" else psi.sample(rng, N)
        ptr = np.concatenate([[0], np.cumsum(degs)]).astype(np.int64)
        u = rng.random(int(ptr[-1]))
        nbr_ptr.append(ptr)
        nbr_idx.append(floyd_batch(int(K), np.asarray(degs, dtype=np.int64), u))
    if inputs is None and T > 0:
        inputs = [field.random(rng, (K, T)) for K, _ in users]
    if inputs is not None:
        T = inputs[0].shape[1]
    trace = Trace(field, g.L, T, [K for K, _ in users], g.matrices, types, nbr_ptr, nbr_idx)
    if inputs is not None and T > 0:
        trace.outputs = channel_outputs(trace, inputs)
    return trace, inputs


def coded_payloads(trace: Trace, inputs):
    return [segment_sums(trace.field, inputs[s][trace.nbr_idx[s]], trace.nbr_ptr[s]) for s in range(trace.L)]


def channel_outputs(trace: Trace, inputs):
    """``[v_s] H = [u_1..u_B]`` for every slot."""
    field = trace.field
    V = coded_payloads(trace, inputs)
    out = np.zeros((int(trace.out_ptr[-1]), trace.T), dtype=field.dtype)
    for t, H in enumerate(trace.matrices):
        idx = np.nonzero(trace.types == t)[0]
        if idx.size == 0:
            continue
        for j in range(H.shape[1]):
            acc = np.zeros((idx.size, trace.T), dtype=np.int64)
            for s in range(trace.L):
                if H[s, j]:
                    acc = field.add(acc, field.mul(H[s, j], V[s][idx]))
            out[trace.out_ptr[idx] + j] = acc
    return out
