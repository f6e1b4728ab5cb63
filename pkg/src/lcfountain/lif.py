"""Local information functions: which known sets let a batch give up v_s.

Subsets of users are bitmasks (bit r set means user r is in the set).  A
family is monotone (upward closed) and stored by its minimal sets.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .channel import DEFAULT_LABELS, TransferMatrixDistribution, matrix_key, matrix_to_rows
from .errors import ConfigurationError


def mask_of(users) -> int:
    m = 0
    for r in users:
        m |= 1 << int(r)
    return m


def users_of(mask: int):
    out, r = [], 0
    while mask:
        if mask & 1:
            out.append(r)
        mask >>= 1
        r += 1
    return out


def _minimize(masks):
    masks = sorted(set(masks), key=lambda m: (bin(m).count("1"), m))
    kept = []
    for m in masks:
        if not any(k & m == k for k in kept):
            kept.append(m)
    return frozenset(kept)


class MonotoneFamily:
    """Upward-closed family of subsets of ``range(L)`` minus ``{s}``."""

    __slots__ = ("L", "s", "minimal")

    def __init__(self, L, s, minimal_sets=()):
        self.L, self.s = int(L), int(s)
        bit = 1 << self.s
        masks = [int(m) if isinstance(m, (int, np.integer)) else mask_of(m) for m in minimal_sets]
        for m in masks:
            if m & bit or m >> self.L:
                raise ConfigurationError(f"set {users_of(m)} outside the ground set of user {s}")
        self.minimal = _minimize(masks)

    @classmethod
    def empty(cls, L, s):
        return cls(L, s, ())

    @classmethod
    def full(cls, L, s):
        return cls(L, s, (0,))

    @property
    def ground(self) -> int:
        return ((1 << self.L) - 1) & ~(1 << self.s)

    def __contains__(self, S) -> bool:
        m = S if isinstance(S, (int, np.integer)) else mask_of(S)
        m = int(m) & self.ground
        return any(k & m == k for k in self.minimal)

    def members(self):
        g = self.ground
        out = []
        sub = g
        while True:
            if sub in self:
                out.append(sub)
            if sub == 0:
                break
            sub = (sub - 1) & g
        return sorted(out)

    def __le__(self, other: "MonotoneFamily") -> bool:
        return all(m in other for m in self.minimal)

    def __eq__(self, other):
        return isinstance(other, MonotoneFamily) and (self.L, self.s, self.minimal) == (other.L, other.s, other.minimal)

    def __hash__(self):
        return hash((self.L, self.s, self.minimal))

    def union(self, other: "MonotoneFamily") -> "MonotoneFamily":
        return MonotoneFamily(self.L, self.s, self.minimal | other.minimal)

    def is_empty(self) -> bool:
        return not self.minimal

    def sets(self, labels=None):
        """Minimal sets as sorted tuples (of labels when given)."""
        out = sorted((tuple(users_of(m)) for m in self.minimal), key=lambda t: (len(t), t))
        if labels is None:
            return out
        return [tuple(labels[r] for r in t) for t in out]

    def __repr__(self):
        lab = DEFAULT_LABELS
        body = ", ".join("{" + ",".join(t) + "}" for t in self.sets(lab))
        return f"MonotoneFamily(s={lab[self.s]}, <{body}>)"


# -- family constructions ----------------------------------------------------


def _rank_mod(rows, q):
    rows = [list(r) for r in rows]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] % q), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = pow(rows[rank][c], q - 2, q)
        rows[rank] = [(v * inv) % q for v in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c] % q:
                f = rows[i][c]
                rows[i] = [(a - f * b) % q for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def _check(H, s):
    H = np.asarray(H, dtype=np.int64)
    if H.ndim != 2:
        raise ConfigurationError("transfer matrix must be two-dimensional")
    if not 0 <= s < H.shape[0]:
        raise ConfigurationError(f"user {s} outside 0..{H.shape[0] - 1}")
    return H


def gamma_star(H, s, q=2) -> MonotoneFamily:
    """Known sets S for which some column combination of H is the unit vector of s on Θ∖S."""
    H = _check(H, s)
    L, B = H.shape
    fam = []
    others = [r for r in range(L) if r != s]
    for size in range(L):
        for S in combinations(others, size):
            m = mask_of(S)
            if any(k & m == k for k in fam):
                continue
            U = [r for r in range(L) if r not in S]
            A = [[int(H[r, j]) for j in range(B)] for r in U]
            aug = [row + [1 if r == s else 0] for row, r in zip(A, U)]
            if B and _rank_mod(A, q) == _rank_mod(aug, q):
                fam.append(m)
    return MonotoneFamily(L, s, fam)


def gamma_star_bruteforce(H, s, q=2) -> MonotoneFamily:
    """Reference: try all q^B column combinations against e_s for every S."""
    from itertools import product

    H = _check(H, s)
    L, B = H.shape
    hits = []
    others = [r for r in range(L) if r != s]
    combos = [np.array(w) for w in product(range(q), repeat=B)]
    vecs = [(H @ w) % q for w in combos]
    for size in range(L):
        for S in combinations(others, size):
            U = [r for r in range(L) if r not in S]
            target = np.array([1 if r == s else 0 for r in U])
            if any(np.array_equal(v[U], target) for v in vecs):
                hits.append(mask_of(S))
    return MonotoneFamily(L, s, hits)


def column_supports(H):
    H = np.asarray(H)
    return [mask_of(np.nonzero(H[:, j])[0]) for j in range(H.shape[1])]


def gamma_o(H, s) -> MonotoneFamily:
    """Single-column solves: span of supp_j minus s over columns touching s."""
    H = _check(H, s)
    bit = 1 << s
    gens = [m & ~bit for m in column_supports(H) if m & bit]
    return MonotoneFamily(H.shape[0], s, gens)


def gamma_b_all(H, i, literal=False):
    """Bounded-depth BP families for every user: ``[γ_s^{b,i}(H) for s]``.

    Depth one is ``gamma_o``.  Each further level lets v_s come from a
    single-column solve whose other unknowns were resolved one level down.
    By default a user already in the known set also counts as resolved;
    ``literal=True`` drops that case and only chains through deeper solves.
    """
    H = np.asarray(H, dtype=np.int64)
    L = H.shape[0]
    if i < 1:
        raise ConfigurationError("iteration bound must be >= 1")
    base = [gamma_o(H, s) for s in range(L)]
    cur = base
    for _ in range(2, i + 1):
        nxt = []
        for s in range(L):
            found = list(cur[s].minimal)
            for T in base[s].minimal:
                choices = []
                for r in users_of(T):
                    opts = [m for m in cur[r].minimal if not m >> s & 1]
                    if not literal:
                        opts.append(1 << r)
                    choices.append(opts)
                found.extend(_unions(choices))
            nxt.append(MonotoneFamily(L, s, found))
        if nxt == cur:
            break
        cur = nxt
    return cur


def _unions(choices):
    acc = [0]
    for opts in choices:
        if not opts:
            return []
        acc = list({a | o for a in acc for o in opts})
    return acc


def gamma_b(H, s, i, literal=False) -> MonotoneFamily:
    _check(H, s)
    return gamma_b_all(H, i, literal)[s]


# -- probability polynomial --------------------------------------------------


def gamma_big(family: MonotoneFamily, p):
    """Probability that the known set is a member when user r is known w.p. ``p[r]``.

    ``p`` has one entry per user (the entry for s is ignored); entries may be
    numpy arrays of a common shape.
    """
    L, s = family.L, family.s
    ps = [np.asarray(p[r], dtype=float) for r in range(L)]
    total = np.zeros(np.broadcast(*ps).shape)
    for m in family.members():
        term = 1.0
        for r in range(L):
            if r == s:
                continue
            term = term * (ps[r] if m >> r & 1 else 1.0 - ps[r])
        total = total + term
    return float(total) if total.ndim == 0 else total


def multilinear_coeffs(family: MonotoneFamily):
    """``{T: c_T}`` with ``gamma_big(family, p) == sum_T c_T prod_{r in T} p_r``."""
    g = family.ground
    f = {}
    sub = g
    while True:
        f[sub] = 1 if sub in family else 0
        if sub == 0:
            break
        sub = (sub - 1) & g
    coeffs = {}
    for T in f:
        c, S = 0, T
        while True:
            c += (-1) ** bin(T & ~S).count("1") * f[S]
            if S == 0:
                break
            S = (S - 1) & T
        if c:
            coeffs[T] = c
    return coeffs


# -- tables ------------------------------------------------------------------


KINDS = ("star", "o", "b")


def family_for(H, s, kind, i=None, q=2, literal=False):
    if kind == "star":
        return gamma_star(H, s, q)
    if kind == "o":
        return gamma_o(H, s)
    if kind == "b":
        return gamma_b(H, s, i or np.asarray(H).shape[0], literal)
    raise ConfigurationError(f"unknown LIF kind {kind!r}")


class LIFTable:
    """Families for every (matrix, user) of a matrix list under one LIF kind."""

    def __init__(self, matrices, kind="star", i=None, q=2, literal=False):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown LIF kind {kind!r}")
        self.kind, self.i, self.q, self.literal = kind, i, q, literal
        self.matrices = [np.asarray(H, dtype=np.int64) for H in matrices]
        self._index = {}
        self.families = []
        for n, H in enumerate(self.matrices):
            self._index.setdefault(matrix_key(H), n)
            L = H.shape[0]
            if kind == "b":
                self.families.append(gamma_b_all(H, i or L, literal))
            else:
                self.families.append([family_for(H, s, kind, q=q) for s in range(L)])

    @classmethod
    def for_distribution(cls, g: TransferMatrixDistribution, kind="star", i=None, literal=False):
        return cls(g.matrices, kind, i, g.q, literal)

    def family(self, h, s) -> MonotoneFamily:
        if not isinstance(h, (int, np.integer)):
            h = self._index[matrix_key(h)]
        return self.families[h][s]

    def release_table(self):
        """``R[h, s, mask]`` is 1 when known set ``mask`` (minus s) lets batch type h release v_s."""
        if not self.matrices:
            return np.zeros((0, 0, 1), dtype=np.uint8)
        L = self.matrices[0].shape[0]
        R = np.zeros((len(self.matrices), L, 1 << L), dtype=np.uint8)
        for h, fams in enumerate(self.families):
            for s, fam in enumerate(fams):
                for mask in range(1 << L):
                    if not mask >> s & 1 and mask in fam:
                        R[h, s, mask] = 1
        return R

    def listing(self, labels=DEFAULT_LABELS):
        """Plain-text rows ``matrix | user | minimal sets`` for documentation."""
        lines = []
        for H, fams in zip(self.matrices, self.families):
            rows = ",".join(matrix_to_rows(H))
            for s, fam in enumerate(fams):
                sets = " ".join("{" + ",".join(t) + "}" for t in fam.sets(labels)) or "-"
                lines.append(f"{rows} | {labels[s]} | {sets}")
        return "\n".join(lines)


def aggregate_gamma(g: TransferMatrixDistribution, lif: LIFTable, s, p):
    """``sum_H g(H) Γ_s(H, p)``."""
    total = 0.0
    for H, w in g:
        total = total + w * gamma_big(lif.family(H, s), p)
    return total
