from itertools import product

import numpy as np
import pytest

from lcfountain import field as ff
from lcfountain.channel import catalog
from lcfountain.errors import ConfigurationError
from lcfountain.field import FieldSpec


def _shift_and_add(a, b, m, modulus_int):
    """Carry-less multiply in GF(2^m), reducing one bit at a time."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= modulus_int
    return acc


def _mod_int(f):
    return sum(c << i for i, c in enumerate(f.modulus))


def test_small_sums():
    assert int(FieldSpec(2, 1).add(1, 1)) == 0
    assert int(FieldSpec(3, 1).add(2, 2)) == 1
    f = FieldSpec(2, 8)
    a = f.random(np.random.default_rng(0), 50)
    assert not np.any(f.add(a, a))


def test_symbol_operators_and_field_mismatch():
    f = FieldSpec(3, 2)
    a, b = f.element(5), f.element(7)
    assert (a + b) - b == a
    assert (a * b) / b == a
    assert ff.add(a, -a).value == 0
    assert ff.mul(a, f.element(1)) == a
    with pytest.raises(ConfigurationError):
        a + FieldSpec(2, 2).element(1)


def test_gf256_modulus_is_0x11d():
    assert _mod_int(FieldSpec(2, 8)) == 0x11D


def test_gf16_product_matches_shift_and_add():
    f = FieldSpec(2, 4)
    mod = _mod_int(f)
    rng = np.random.default_rng(1)
    a = rng.integers(0, 16, 500)
    b = rng.integers(0, 16, 500)
    got = f.mul(a, b)
    want = [_shift_and_add(int(x), int(y), 4, mod) for x, y in zip(a, b)]
    assert got.tolist() == want


def test_identities():
    for f in (FieldSpec(2, 8), FieldSpec(3, 3), FieldSpec(7, 1)):
        a = np.arange(f.order)
        assert np.array_equal(f.mul(a, 1), a)
        assert not np.any(f.mul(a, 0))


@pytest.mark.parametrize("q,m", [(2, 3), (3, 2), (5, 1), (2, 8)])
def test_field_axioms_exhaustive(q, m):
    f = FieldSpec(q, m)
    n = f.order
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    assert np.array_equal(f.add(a, b), f.add(b, a))
    assert np.array_equal(f.mul(a, b), f.mul(b, a))
    nz = np.arange(1, n)
    assert np.all(f.mul(nz, f.inv(nz)) == 1)
    assert np.all(f.add(np.arange(n), f.neg(np.arange(n))) == 0)
    rng = np.random.default_rng(q * 31 + m)
    x, y, z = (rng.integers(0, n, 2000) for _ in range(3))
    assert np.array_equal(f.mul(f.mul(x, y), z), f.mul(x, f.mul(y, z)))
    assert np.array_equal(f.add(f.add(x, y), z), f.add(x, f.add(y, z)))
    assert np.array_equal(f.mul(x, f.add(y, z)), f.add(f.mul(x, y), f.mul(x, z)))


def test_inverse_of_zero():
    with pytest.raises(ZeroDivisionError):
        FieldSpec(2, 4).inv(0)


def test_unsupported_fields():
    with pytest.raises(ConfigurationError):
        FieldSpec(4, 1)
    with pytest.raises(ConfigurationError):
        FieldSpec(2, 17)


def _rank_by_span(M, q):
    """log_q of the number of distinct column combinations."""
    M = np.asarray(M)
    span = {tuple(M @ np.array(w) % q) for w in product(range(q), repeat=M.shape[1])}
    return round(np.log(len(span)) / np.log(q))


def test_rank_examples():
    base = FieldSpec(2, 1)
    assert ff.rank(np.eye(3, dtype=int), base) == 3
    assert ff.rank(catalog(3)[14], base) == 2
    rng = np.random.default_rng(2)
    for _ in range(30):
        M = rng.integers(0, 2, (4, 3))
        assert ff.rank(M, base) == _rank_by_span(M, 2)


def test_rank_invariant_under_column_operations():
    rng = np.random.default_rng(3)
    for q in (2, 3, 5):
        base = FieldSpec(q, 1)
        for _ in range(40):
            r, c = rng.integers(1, 7, 2)
            M = rng.integers(0, q, (r, c))
            while True:
                Phi = rng.integers(0, q, (c, c))
                if ff.rank(Phi, base) == c:
                    break
            assert ff.rank(ff.matmul(M, Phi, base), base) == ff.rank(M, base)


def test_column_echelon():
    base = FieldSpec(2, 1)
    Hh, Phi = ff.solve_reduced_column_echelon(np.eye(3, dtype=int), base)
    assert np.array_equal(Hh, np.eye(3)) and np.array_equal(Phi, np.eye(3))
    cat = catalog(3)
    h16, _ = ff.solve_reduced_column_echelon(cat[15], base)
    h15, _ = ff.solve_reduced_column_echelon(cat[14], base)
    # column-equivalent: same column span
    assert ff.rank(np.hstack([h15, h16]), base) == 2
    g3 = FieldSpec(3, 1)
    rng = np.random.default_rng(4)
    done = 0
    while done < 20:
        M = rng.integers(0, 3, (4, 2))
        if ff.rank(M, g3) < 2:
            continue
        Hh, Phi = ff.solve_reduced_column_echelon(M, g3)
        assert np.array_equal(ff.matmul(M, Phi, g3), Hh)
        assert ff.rank(Hh, g3) == 2 and ff.rank(Phi, g3) == 2
        done += 1


def test_packet_operations_are_symbolwise():
    f = FieldSpec(2, 8)
    rng = np.random.default_rng(5)
    u, v = f.random(rng, 64), f.random(rng, 64)
    c = 0x53
    got = f.mul(c, f.add(u, v))
    want = np.array([int(f.add(f.mul(c, a), f.mul(c, b))) for a, b in zip(u, v)])
    assert np.array_equal(got, want)


def test_solve_vector():
    base = FieldSpec(3, 1)
    A = np.array([[1, 2], [0, 1], [1, 0]])
    w = np.array([2, 1])
    b = ff.matmul(A, w.reshape(-1, 1), base).ravel()
    assert np.array_equal(ff.solve_vector(A, b, base), w)
    assert ff.solve_vector(np.array([[1], [1]]), np.array([1, 2]), base) is None
