import math

import numpy as np
import pytest
from scipy.optimize import brentq

from lcfountain.analysis import (AnalysisConfig, FeasibleCurve, big_f, curve_feasible, first_intersection,
                                 fixed_point, is_feasible, little_f, straighten_curve, zigzag_curve)
from lcfountain.channel import TransferMatrixDistribution
from lcfountain.errors import ConfigurationError, InvalidArgumentError
from lcfountain.lt import DegreeDistribution
from lcfountain.profiles import lc2, lc3, reference_psi_a, reference_psi_b

SINGLE = TransferMatrixDistribution.from_records([{"rows": ["1"], "p": 1.0}])
DECOUPLED = TransferMatrixDistribution.from_records([{"rows": ["10", "01"], "p": 1.0}])
PSI = DegreeDistribution([0.1, 0.5, 0.2, 0.2])


def test_big_f_at_zero_is_degree_one_mass():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_a(), reference_psi_b()], [0.5, 0.5])
    for s, psi in enumerate(cfg.psis):
        assert big_f(s, 0.0, [0.3, 0.3], cfg) == pytest.approx(psi.probs[0])


@pytest.mark.parametrize("c", [0.3, 0.5, 1.0, 2.0])
def test_degree_one_code_matches_coupon_collector(c):
    # N degree-one packets over K = cN inputs cover 1 - exp(-1/c) of them
    cfg = AnalysisConfig(SINGLE, [DegreeDistribution([1.0])], [c])
    assert little_f(0, [0.0], cfg) == pytest.approx(1 - math.exp(-1 / c), abs=1e-8)


def test_decoupled_users_reduce_to_single_lt_thresholds():
    # beta = 2 here, so the per-user ratio C_s / den is 2 c_s
    assert DECOUPLED.beta() == pytest.approx(2.0)
    c = [0.6, 0.8]
    cfg = AnalysisConfig(DECOUPLED, [PSI, PSI], c)
    lim = fixed_point(cfg).limit
    for s in range(2):
        fun = lambda x, cs=2 * c[s]: PSI.derivative(x) + cs * math.log1p(-x)
        xs = np.linspace(0, 1 - 1e-12, 20001)
        k = int(np.nonzero(np.array([fun(x) for x in xs]) < 0)[0][0])
        assert lim[s] == pytest.approx(brentq(fun, xs[k - 1], xs[k]), abs=1e-6)


def test_elimination_limit_dominates_substitution():
    g = lc3((0.1,) * 3, (0.0,) * 3, 0.1, 0.3)
    psis = [reference_psi_b()] * 3
    c = [0.45] * 3
    star = fixed_point(AnalysisConfig(g, psis, c, "star")).limit
    sub = fixed_point(AnalysisConfig(g, psis, c, "o")).limit
    assert np.all(star >= sub - 1e-9)


def test_first_intersection_is_a_minimal_fixed_point():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_b()] * 2, [0.45, 0.45])
    hit = first_intersection(cfg, np.random.default_rng(0), starts=4)
    assert hit.on_surfaces and hit.minimal
    assert is_feasible(hit.point, cfg)


def test_restarting_from_an_iterate_reaches_the_same_limit():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_a(), reference_psi_b()], [0.45, 0.45])
    tr = fixed_point(cfg)
    mid = tr.iterates[len(tr.iterates) // 2]
    assert np.allclose(fixed_point(cfg, start=mid).limit, tr.limit, atol=1e-8)


def test_bad_analysis_inputs():
    with pytest.raises(ConfigurationError):
        AnalysisConfig(DECOUPLED, [PSI], [0.5, 0.5])
    with pytest.raises(ConfigurationError):
        AnalysisConfig(DECOUPLED, [PSI, PSI], [0.5, 0.0])


def test_zigzag_vertex_order():
    curve = zigzag_curve([[0.2, 0.5], [0.1, 0.4]])
    expected = [[0, 0], [0.2, 0], [0.2, 0.1], [0.5, 0.1], [0.5, 0.4]]
    assert np.allclose(curve.points, expected)
    assert curve.monotone


@pytest.mark.parametrize("bps,targets", [([[0.3, 0.2], [0.1, 0.4]], None), ([[0.2], [0.1, 0.4]], None),
                                         ([[0.2, 0.5], [0.1, 0.4]], [0.5, 0.45]), ([[1.0], [0.2]], None)])
def test_zigzag_rejects_bad_breakpoints(bps, targets):
    with pytest.raises(InvalidArgumentError):
        zigzag_curve(bps, targets)


def test_straighten_hand_example():
    curve = FeasibleCurve(np.array([[0, 0], [0.5, 0.2], [0.3, 0.4], [0.6, 0.6]]))
    out = straighten_curve(curve)
    expected = [[0, 0], [0.5, 0.2], [0.5, 0.4], [0.5, 0.4 + 0.2 * 2 / 3], [0.6, 0.6]]
    assert np.allclose(out.points, expected)
    assert out.monotone


def test_overshooting_curve_needs_the_config():
    curve = FeasibleCurve(np.array([[0, 0], [0.8, 0.1], [0.5, 0.5]]))
    with pytest.raises(InvalidArgumentError):
        straighten_curve(curve)


def test_overshooting_curve_ends_exactly_at_its_endpoint():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_a(), reference_psi_b()], [0.45, 0.45])
    z = fixed_point(cfg).iterates
    end = np.array([z[3][0], z[4][1]])
    curve = FeasibleCurve(np.array([z[0], z[2], z[4], end]))
    out = straighten_curve(curve, cfg)
    assert out.monotone
    assert np.array_equal(out.points[-1], end)
    assert out.points[:, 0].max() <= end[0]
    assert curve_feasible(out, cfg)


def test_straightened_feasible_curve_stays_feasible():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_a(), reference_psi_b()], [0.45, 0.45])
    z = fixed_point(cfg).iterates
    # mixing coordinates of neighboring iterates keeps each vertex feasible
    pts = [z[0], z[4], [z[3][0], z[4][1]], [z[3][0], z[2][1]], z[6], [z[5][0], z[6][1]], z[-1]]
    wiggle = FeasibleCurve(np.array(pts))
    assert all(is_feasible(p, cfg) for p in wiggle.points)
    out = straighten_curve(wiggle, cfg)
    assert out.monotone and curve_feasible(out, cfg)


def test_straighten_rejects_infeasible_input():
    cfg = AnalysisConfig(lc2(0.25, 0.25, 0.5), [reference_psi_b()] * 2, [0.45, 0.45])
    with pytest.raises(InvalidArgumentError):
        straighten_curve(FeasibleCurve(np.array([[0, 0], [0.999, 0.999]])), cfg)


def test_increasing_curve_is_unchanged():
    pts = np.array([[0, 0], [0.2, 0], [0.2, 0.3], [0.4, 0.5]])
    assert np.array_equal(straighten_curve(FeasibleCurve(pts)).points, pts)
