"""Reference degree distributions and channel profiles used by examples and tests."""

from .channel import distribution_from_alphas
from .lt import DegreeDistribution

# Rounded to four decimals, so the masses sum to 0.9991 and 1.0001.
FOUR_DECIMAL_TOL = 2e-3
PSI_A_PAIRS = {1: 0.1040, 2: 0.8362, 26: 0.0582, 27: 0.0007}
PSI_B_PAIRS = {1: 0.1133, 2: 0.7902, 13: 0.0662, 14: 0.0284, 15: 0.0020}


def reference_psi_a() -> DegreeDistribution:
    return DegreeDistribution.from_pairs(PSI_A_PAIRS, tol=FOUR_DECIMAL_TOL)


def reference_psi_b() -> DegreeDistribution:
    return DegreeDistribution.from_pairs(PSI_B_PAIRS, tol=FOUR_DECIMAL_TOL)


def lc2(alpha_a, alpha_b, alpha_ab):
    """Binary two-user channel with beta = 1 and the given output fractions."""
    return distribution_from_alphas(2, {(0,): alpha_a, (1,): alpha_b, (0, 1): alpha_ab})


def lc3(singles, pairs, triple, bar):
    """Binary three-user channel with beta = 1.

    ``singles`` = (A, B, C), ``pairs`` = (AB, AC, BC), ``bar`` = per-user
    non-autonomous fractions (A, B, C), or a scalar split evenly.
    """
    if not isinstance(bar, (tuple, list)):
        bar = (bar / 3.0,) * 3
    alpha = {(0,): singles[0], (1,): singles[1], (2,): singles[2],
             (0, 1): pairs[0], (0, 2): pairs[1], (1, 2): pairs[2], (0, 1, 2): triple}
    return distribution_from_alphas(3, alpha, bar)


# (alpha_AB, alpha_A, alpha_B) -> rows reported for eta = 0.98
LC2_ROWS = {
    "balanced": (0.5, 0.25, 0.25),
    "weak-coupling": (0.05, 0.475, 0.475),
    "asymmetric": (0.5, 0.45, 0.05),
}
