"""Randomized invariants, at least 100 generated cases each."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from lcfountain import field as ff
from lcfountain.analysis import AnalysisConfig, FeasibleCurve, fixed_point, is_feasible, little_f, straighten_curve
from lcfountain.channel import TransferMatrixDistribution, catalog, derive_profile, generate_batches
from lcfountain.decoder import DecoderConfig, decode
from lcfountain.field import FieldSpec
from lcfountain.lif import gamma_b, gamma_big, gamma_o, gamma_star
from lcfountain.lt import CodedPacket, DegreeDistribution, PeelingState, peel
from lcfountain.optimizer import degree_cap, degree_cap_transform
from lcfountain.profiles import lc3

CASES = settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)
BASE = FieldSpec(2, 1)


def _random_matrix(rng, L):
    while True:
        B = int(rng.integers(1, L + 1))
        H = rng.integers(0, 2, (L, B))
        if ff.rank(H, BASE) == B:
            return H


def _random_psi(rng, D):
    w = rng.dirichlet(np.ones(D) * 0.5)
    w[0] += 0.05  # some degree-one mass so decoding can start
    return DegreeDistribution(w / w.sum())


def _random_lc3(rng):
    mats = catalog(3)
    w = rng.dirichlet(np.ones(len(mats)))
    return TransferMatrixDistribution(list(zip(mats, w)))


def _random_cfg(rng):
    g = _random_lc3(rng) if rng.random() < 0.5 else TransferMatrixDistribution(
        list(zip(catalog(2), rng.dirichlet(np.ones(4)))))
    L = g.L
    psis = [_random_psi(rng, int(rng.integers(2, 12))) for _ in range(L)]
    c = rng.uniform(0.2, 1.5, L).tolist()
    return AnalysisConfig(g, psis, c, "star" if rng.random() < 0.7 else "o", grid=512)


@CASES
@given(seeds, st.integers(2, 4))
def test_gamma_big_is_monotone(seed, L):
    rng = np.random.default_rng(seed)
    H = _random_matrix(rng, L)
    s = int(rng.integers(L))
    fam = gamma_star(H, s)
    lo = rng.random(L)
    hi = lo + rng.random(L) * (1 - lo)
    assert gamma_big(fam, lo) <= gamma_big(fam, hi) + 1e-12


@CASES
@given(seeds, st.integers(2, 4))
def test_partial_families_form_a_chain(seed, L):
    rng = np.random.default_rng(seed)
    H = _random_matrix(rng, L)
    s = int(rng.integers(L))
    chain = [gamma_o(H, s)] + [gamma_b(H, s, i) for i in range(1, L + 1)] + [gamma_star(H, s)]
    for small, big in zip(chain[:-1], chain[1:]):
        assert small <= big


@CASES
@given(seeds)
def test_fixed_point_iterates_increase(seed):
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(rng)
    it = fixed_point(cfg, max_iter=60).iterates
    assert np.all(np.diff(it, axis=0) >= -1e-9)


@CASES
@given(seeds)
def test_f_is_monotone_in_the_other_users(seed):
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(rng)
    lo = rng.random(cfg.L) * 0.95
    hi = lo + rng.random(cfg.L) * (0.95 - lo)
    for s in range(cfg.L):
        assert little_f(s, lo, cfg) <= little_f(s, hi, cfg) + 1e-8


def _feasible_walk(rng, cfg, moves):
    """Axis-aligned walk through feasible points, with backward moves."""
    x = np.zeros(cfg.L)
    pts = [x.copy()]
    for _ in range(moves):
        s = int(rng.integers(cfg.L))
        cand = x.copy()
        cand[s] = rng.uniform(0, little_f(s, x, cfg))
        if is_feasible(cand, cfg):
            x = cand
            pts.append(x.copy())
    return np.array(pts)


@CASES
@given(seeds)
def test_axis_segments_between_feasible_points_are_feasible(seed):
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(rng)
    pts = _feasible_walk(rng, cfg, 4)
    a, b = pts[-2] if len(pts) > 1 else pts[0], pts[-1]
    for lam in np.linspace(0, 1, 9):
        assert is_feasible(a + lam * (b - a), cfg)


@CASES
@given(seeds)
def test_straightening_gives_monotone_feasible_curves(seed):
    rng = np.random.default_rng(seed)
    cfg = _random_cfg(rng)
    curve = FeasibleCurve(_feasible_walk(rng, cfg, 8))
    out = straighten_curve(curve, cfg)
    assert out.monotone
    assert np.allclose(out.points[0], 0) and np.allclose(out.points[-1], curve.points[-1])
    assert all(is_feasible(p, cfg) for p in out.sample(6))


@CASES
@given(seeds, st.floats(0.5, 0.99))
def test_cap_transform_dominates_pointwise(seed, eta):
    rng = np.random.default_rng(seed)
    psi = _random_psi(rng, int(rng.integers(1, 3 * degree_cap(eta) + 3)))
    cap = degree_cap_transform(psi, eta)
    xs = np.linspace(0, eta, 100)
    assert np.all(cap.derivative(xs) >= psi.derivative(xs) - 1e-12)
    assert np.all(cap(xs) >= psi(xs) - 1e-12)


@CASES
@given(seeds)
def test_decoder_instances_dominate(seed):
    rng = np.random.default_rng(seed)
    g = lc3(tuple(rng.dirichlet(np.ones(3)) * 0.3), (0.0,) * 3, 0.1, 0.3)
    psi = _random_psi(rng, 6)
    trace, _ = generate_batches([(30, psi)] * 3, g, int(rng.integers(30, 90)), rng)
    sub, bp, ge = (decode(trace, DecoderConfig(k, 3 if k == "bp" else None), payloads=False).state.decoded
                   for k in ("substitution", "bp", "ge"))
    for s in range(3):
        assert np.all(bp[s] >= sub[s]) and np.all(ge[s] >= bp[s])


@CASES
@given(seeds)
def test_peeling_order_does_not_matter(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(5, 40))
    checks = [CodedPacket(0, tuple(sorted(rng.choice(K, int(rng.integers(1, min(K, 4) + 1)), replace=False))))
              for _ in range(int(rng.integers(K // 2, 2 * K)))]
    ref = peel(PeelingState(K), checks).decoded
    for _ in range(3):
        order = [checks[i] for i in rng.permutation(len(checks))]
        assert np.array_equal(peel(PeelingState(K), order).decoded, ref)


@CASES
@given(seeds)
def test_lc3_profile_identity(seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(17)) * rng.uniform(0.2, 1.0)  # leftover mass is an empty slot
    prof = derive_profile(TransferMatrixDistribution(list(zip(catalog(3), w))))
    assert prof.non_autonomous == 0
    assert sum(prof.alpha.values()) + 2 * prof.bar == pytest.approx(1.0, abs=1e-12)
