"""Arithmetic over GF(q) and GF(q^m), plus small dense linear algebra.

Elements of GF(q^m) are stored as integers ``0 .. q^m - 1`` whose base-q
digits are the coefficients of a polynomial in ``x`` (digit ``i`` is the
coefficient of ``x^i``).  Base-field elements are therefore the integers
``0 .. q - 1`` in both fields, so a transfer matrix over GF(q) acts on
packets over GF(q^m) without any conversion.

Reduction polynomials are pinned: for every ``(q, m)`` the modulus is the
lexicographically smallest monic primitive polynomial of degree ``m``
(coefficients compared from ``x^(m-1)`` down to ``x^0``).  For q = 2 this
gives the usual choices, e.g. ``x^8 + x^4 + x^3 + x^2 + 1`` (0x11D) for
GF(2^8).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ConfigurationError

SUPPORTED_Q = (2, 3, 5, 7)
MAX_ORDER = 1 << 16


class OpCounter:
    """Tally of field operations; vector operations count one per symbol."""

    def __init__(self):
        self.ops = 0

    def add(self, n):
        self.ops += int(n)


@dataclass(frozen=True)
class FieldSpec:
    q: int = 2
    m: int = 8

    def __post_init__(self):
        if self.q not in SUPPORTED_Q:
            raise ConfigurationError(f"base field order q={self.q} not in {SUPPORTED_Q}")
        if self.m < 1:
            raise ConfigurationError(f"extension degree m={self.m} must be >= 1")
        if self.q ** self.m > MAX_ORDER:
            raise ConfigurationError(f"q^m = {self.q ** self.m} exceeds {MAX_ORDER}")

    @property
    def order(self) -> int:
        return self.q ** self.m

    @property
    def base(self) -> "FieldSpec":
        return FieldSpec(self.q, 1)

    @property
    def dtype(self):
        return np.uint8 if self.order <= 256 else np.uint16

    @property
    def modulus(self) -> tuple:
        """Coefficients of the reduction polynomial, lowest degree first."""
        return _tables(self.q, self.m).modulus

    # -- vectorised element arithmetic -------------------------------------

    def add(self, a, b):
        if self.q == 2:
            return np.bitwise_xor(a, b)
        t = _tables(self.q, self.m)
        return t.compose((t.digits[a] + t.digits[b]) % self.q)

    def neg(self, a):
        if self.q == 2:
            return a
        t = _tables(self.q, self.m)
        return t.compose((-t.digits[a]) % self.q)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        t = _tables(self.q, self.m)
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = t.exp[(t.log[a] + t.log[b]) % (self.order - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero in finite field")
        t = _tables(self.q, self.m)
        return t.exp[(self.order - 1 - t.log[a]) % (self.order - 1)]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def element(self, value: int) -> "Symbol":
        return Symbol(int(value), self)

    def random(self, rng, size):
        return rng.integers(0, self.order, size=size).astype(self.dtype)


@functools.lru_cache(maxsize=None)
def _tables(q: int, m: int):
    return _FieldTables(q, m)


class _FieldTables:
    def __init__(self, q, m):
        self.q, self.m = q, m
        order = q ** m
        self.powers = np.array([q ** i for i in range(m)], dtype=np.int64)
        idx = np.arange(order, dtype=np.int64)
        self.digits = ((idx[:, None] // self.powers[None, :]) % q).astype(np.int64)
        for tail in _monic_candidates(q, m):
            exp = _power_table(q, m, tail)
            if exp is not None:
                self.modulus = tuple(tail) + (1,)
                break
        else:  # pragma: no cover - a primitive polynomial always exists
            raise ConfigurationError(f"no primitive polynomial for GF({q}^{m})")
        self.exp = np.asarray(exp, dtype=np.int64)
        self.log = np.zeros(order, dtype=np.int64)
        self.log[self.exp] = np.arange(order - 1)

    def compose(self, digits):
        return digits @ self.powers


def _monic_candidates(q, m):
    # lowest coefficient last in the iteration key so x^(m-1) varies slowest
    for coeffs in product(range(q), repeat=m):
        tail = tuple(reversed(coeffs))  # tail[i] is coefficient of x^i
        if tail[0] == 0:
            continue
        yield tail


def _power_table(q, m, tail):
    """Successive powers of ``x`` modulo ``x^m + tail``; None if x is not primitive."""
    order = q ** m
    red = [(-c) % q for c in tail]  # x^m == sum red[i] x^i
    cur = [0] * m
    cur[0] = 1
    out = []
    powers = [q ** i for i in range(m)]
    for k in range(order - 1):
        val = sum(c * p for c, p in zip(cur, powers))
        if k > 0 and val == 1:
            return None
        out.append(val)
        top = cur[-1]
        cur = [0] + cur[:-1]
        if top:
            cur = [(c + top * r) % q for c, r in zip(cur, red)]
    if len(set(out)) != order - 1:
        return None
    return out


@dataclass(frozen=True)
class Symbol:
    """A single field element bound to its field, with operator sugar."""

    value: int
    field: FieldSpec

    def _check(self, other):
        if not isinstance(other, Symbol) or other.field != self.field:
            raise ConfigurationError("operands belong to different fields")

    def __add__(self, other):
        self._check(other)
        return Symbol(int(self.field.add(self.value, other.value)), self.field)

    def __sub__(self, other):
        self._check(other)
        return Symbol(int(self.field.sub(self.value, other.value)), self.field)

    def __mul__(self, other):
        self._check(other)
        return Symbol(int(self.field.mul(self.value, other.value)), self.field)

    def __truediv__(self, other):
        self._check(other)
        return Symbol(int(self.field.div(self.value, other.value)), self.field)

    def __neg__(self):
        return Symbol(int(self.field.neg(self.value)), self.field)


def add(a: Symbol, b: Symbol) -> Symbol:
    return a + b


def mul(a: Symbol, b: Symbol) -> Symbol:
    return a * b


# -- dense matrices ----------------------------------------------------------


def as_matrix(rows, field: FieldSpec | None = None) -> np.ndarray:
    """Build an int64 matrix; accepts nested lists or digit strings like ``"10"``."""
    if isinstance(rows, np.ndarray):
        M = rows.astype(np.int64)
    else:
        rows = [[int(ch) for ch in r] if isinstance(r, str) else list(r) for r in rows]
        M = np.array(rows, dtype=np.int64)
    if M.ndim != 2:
        M = M.reshape(len(M), -1)
    if field is not None and (M.min(initial=0) < 0 or M.max(initial=0) >= field.order):
        raise ConfigurationError("matrix entries out of field range")
    return M


def matmul(A, B, field: FieldSpec) -> np.ndarray:
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for k in range(A.shape[1]):
        out = field.add(out, field.mul(A[:, k:k + 1], B[k:k + 1, :]))
    return np.asarray(out, dtype=np.int64)


def row_reduce(M, field: FieldSpec, counter: OpCounter | None = None):
    """Reduced row echelon form.  Returns (R, E, pivots) with E @ M == R."""
    R = np.array(M, dtype=np.int64, copy=True)
    rows, cols = R.shape
    E = np.eye(rows, dtype=np.int64)
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if len(nz) == 0:
            continue
        p = r + nz[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
            E[[r, p]] = E[[p, r]]
        inv = field.inv(R[r, c])
        R[r] = field.mul(R[r], inv)
        E[r] = field.mul(E[r], inv)
        if counter is not None:
            counter.add(cols + rows)
        for i in range(rows):
            if i != r and R[i, c] != 0:
                f = R[i, c]
                R[i] = field.sub(R[i], field.mul(f, R[r]))
                E[i] = field.sub(E[i], field.mul(f, E[r]))
                if counter is not None:
                    counter.add(2 * (cols + rows))
        pivots.append(c)
        r += 1
    return R, E, pivots


def rank(M, field: FieldSpec) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return len(row_reduce(M, field)[2])


def solve_reduced_column_echelon(M, field: FieldSpec, counter: OpCounter | None = None):
    """Column-reduce ``M``.  Returns ``(H_hat, Phi)`` with ``M @ Phi == H_hat``.

    ``Phi`` is invertible; zero columns of ``H_hat`` come last.
    """
    M = np.asarray(M, dtype=np.int64)
    R, E, _ = row_reduce(M.T, field, counter)
    return R.T.copy(), E.T.copy()


def solve_vector(A, b, field: FieldSpec):
    """Some ``w`` with ``A @ w == b``, or None when the system is inconsistent."""
    A = np.asarray(A, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
    rows, cols = A.shape
    if rows == 0:
        return np.zeros(cols, dtype=np.int64)
    R, _, pivots = row_reduce(np.hstack([A, b]), field)
    if cols in pivots:
        return None
    w = np.zeros(cols, dtype=np.int64)
    for i, c in enumerate(pivots):
        w[c] = R[i, cols]
    return w
