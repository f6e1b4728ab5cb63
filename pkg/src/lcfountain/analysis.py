"""Asymptotic analysis: F_s / f_s, fixed-point iteration, feasibility, curves."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .channel import TransferMatrixDistribution
from .errors import ConfigurationError, InvalidArgumentError
from .lif import LIFTable, multilinear_coeffs, users_of
from .lt import DegreeDistribution

GUARD = 1.0 - 1e-12
SLACK = 1e-9


@dataclass
class AnalysisConfig:
    """Everything the fixed-point analysis needs.

    ``c[s]`` is C_s / beta_L; rates are given in beta-normalized form.
    ``kind`` picks the LIF: ``"star"`` (batched BP with elimination),
    ``"o"`` (substitution only) or ``"b"`` with depth ``i``.
    """

    g: TransferMatrixDistribution
    psis: list
    c: list
    kind: str = "star"
    i: int | None = None
    grid: int = 2048
    xtol: float = 1e-9
    slack: float = SLACK
    _den: list = dc_field(default=None, init=False, repr=False)

    def __post_init__(self):
        L = self.g.L
        if len(self.psis) != L or len(self.c) != L:
            raise ConfigurationError(f"need {L} degree distributions and {L} C values")
        if any(not isinstance(p, DegreeDistribution) for p in self.psis):
            raise ConfigurationError("psis must be DegreeDistribution instances")
        if any(c <= 0 for c in self.c):
            raise ConfigurationError("C values must be positive")
        self.c = [float(c) for c in self.c]
        self._den = denominator_coeffs(self.g, self.kind, self.i)

    @property
    def L(self):
        return self.g.L

    def with_c(self, c):
        return AnalysisConfig(self.g, self.psis, list(c), self.kind, self.i, self.grid, self.xtol, self.slack)

    def with_psis(self, psis):
        return AnalysisConfig(self.g, list(psis), self.c, self.kind, self.i, self.grid, self.xtol, self.slack)


def denominator_coeffs(g: TransferMatrixDistribution, kind="star", i=None):
    """Per user, ``{mask: a}`` with ``sum_H g(H) Γ_s(H, p) / beta = sum a prod_{r in mask} p_r``."""
    beta = g.beta()
    if beta <= 0:
        raise ConfigurationError("beta_L = 0")
    table = LIFTable.for_distribution(g, kind, i)
    out = []
    for s in range(g.L):
        acc = {}
        for h, (H, w) in enumerate(g):
            for mask, c in multilinear_coeffs(table.family(h, s)).items():
                acc[mask] = acc.get(mask, 0.0) + w * c / beta
        out.append({m: a for m, a in acc.items() if abs(a) > 1e-15})
    return out


def eval_multilinear(coeffs, p):
    total = 0.0
    for mask, a in coeffs.items():
        term = a
        for r in users_of(mask):
            term = term * p[r]
        total = total + term
    return total


def denominator(cfg: AnalysisConfig, s, y):
    """``sum_H g(H) Γ_s(H, Ψ_r(y_r)) / beta`` for the other users' fractions ``y``."""
    p = [cfg.psis[r](y[r]) if r != s else 0.0 for r in range(cfg.L)]
    return eval_multilinear(cfg._den[s], p)


def _full(cfg, s, y):
    """Accept ``y`` either over all users or over the others only."""
    y = list(np.atleast_1d(np.asarray(y, dtype=float)))
    if len(y) == cfg.L:
        return y
    if len(y) == cfg.L - 1:
        return y[:s] + [0.0] + y[s:]
    raise ConfigurationError(f"expected {cfg.L - 1} or {cfg.L} coordinates")


def big_f(s, x, y, cfg: AnalysisConfig):
    y = _full(cfg, s, y)
    den = denominator(cfg, s, y)
    x = np.minimum(np.asarray(x, dtype=float), GUARD)
    d = cfg.psis[s].derivative(x)
    if den <= 0:
        out = np.where(x > 0, -np.inf, d)
    else:
        out = d + cfg.c[s] / den * np.log1p(-x)
    return float(out) if np.ndim(out) == 0 else out


def _first_violation(fun, lo, hi, grid, slack, xtol):
    """Largest z in [lo, hi] with fun >= -slack on [lo, z] (grid scan, then bisection)."""
    xs = np.linspace(lo, hi, grid)
    vals = fun(xs)
    bad = np.nonzero(vals < -slack)[0]
    if bad.size == 0:
        return hi
    k = bad[0]
    if k == 0:
        return lo
    a, b = xs[k - 1], xs[k]
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if fun(np.array([mid]))[0] < -slack:
            b = mid
        else:
            a = mid
    return a


def little_f(s, y, cfg: AnalysisConfig):
    y = _full(cfg, s, y)
    den = denominator(cfg, s, y)
    if den <= 0:
        return 0.0
    psi, ratio = cfg.psis[s], cfg.c[s] / den

    def fun(x):
        return psi.derivative(x) + ratio * np.log1p(-x)

    return float(_first_violation(fun, 0.0, GUARD, cfg.grid, cfg.slack, cfg.xtol))


def f_all(z, cfg: AnalysisConfig):
    return np.array([little_f(s, z, cfg) for s in range(cfg.L)])


@dataclass
class FixedPointTrace:
    iterates: np.ndarray  # (iterations + 1, L), row 0 is the origin
    limit: np.ndarray
    iterations: int
    converged: bool

    def to_dict(self):
        return {
            "limit": self.limit.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "iterates": self.iterates.tolist(),
        }


def fixed_point(cfg: AnalysisConfig, start=None, tol=1e-9, max_iter=10_000) -> FixedPointTrace:
    """Jacobi iteration ``z[i] = f(z[i-1])`` from the origin (or ``start``)."""
    z = np.zeros(cfg.L) if start is None else np.asarray(start, dtype=float).copy()
    hist = [z.copy()]
    converged = False
    for _ in range(max_iter):
        nz = f_all(z, cfg)
        hist.append(nz)
        step = np.max(np.abs(nz - z))
        z = nz
        if step < tol:
            converged = True
            break
    it = np.array(hist)
    if start is None and np.any(np.diff(it, axis=0) < -1e-9):
        raise AssertionError("fixed-point iterates from the origin must not decrease")
    return FixedPointTrace(it, z, len(hist) - 1, converged)


@dataclass
class Intersection:
    point: np.ndarray
    on_surfaces: bool
    residual: float
    minimal: bool
    others: list


def first_intersection(cfg: AnalysisConfig, rng=None, starts=8) -> Intersection:
    """Limit of iteration from the origin, checked against limits from random starts."""
    tr = fixed_point(cfg)
    z = tr.limit
    resid = float(np.max(np.abs(f_all(z, cfg) - z)))
    rng = rng if rng is not None else np.random.default_rng(0)
    others = []
    for _ in range(starts):
        t = fixed_point(cfg, start=rng.random(cfg.L) * GUARD, max_iter=2000)
        if t.converged:
            others.append(t.limit)
    minimal = all(np.all(z <= o + 1e-6) for o in others)
    return Intersection(z, resid < 1e-6, resid, minimal, others)


def is_feasible(point, cfg: AnalysisConfig) -> bool:
    a = np.asarray(point, dtype=float)
    return all(a[s] <= little_f(s, a, cfg) + cfg.slack for s in range(cfg.L))


# -- curves ------------------------------------------------------------------


@dataclass
class FeasibleCurve:
    points: np.ndarray  # (V, L) polyline vertices
    feasible: np.ndarray | None = None  # per vertex, when checked

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.points, axis=0) >= -1e-15))

    def sample(self, per_segment=50):
        pts = [self.points[0]]
        for a, b in zip(self.points[:-1], self.points[1:]):
            lam = np.linspace(0, 1, per_segment + 1)[1:, None]
            pts.extend(a + lam * (b - a))
        return np.array(pts)


def zigzag_curve(breakpoints, targets=None, cfg: AnalysisConfig | None = None) -> FeasibleCurve:
    """Axis-aligned staircase: at step t users advance in order to ``x_s[t]``.

    ``breakpoints[s]`` lists ``x_s[1..t_max]``; ``x_s[0] = 0`` is implicit
    and the last entry must equal ``targets[s]`` when targets are given.
    """
    bps = [np.asarray(b, dtype=float) for b in breakpoints]
    t_max = len(bps[0])
    if t_max < 1 or any(len(b) != t_max for b in bps):
        raise InvalidArgumentError("every user needs the same number (>= 1) of breakpoints")
    for s, b in enumerate(bps):
        full = np.concatenate([[0.0], b])
        if np.any(np.diff(full) < 0) or np.any(full < 0) or np.any(full >= 1):
            raise InvalidArgumentError(f"breakpoints of user {s} must be non-decreasing in [0, 1)")
        if targets is not None and abs(b[-1] - targets[s]) > 1e-12:
            raise InvalidArgumentError(f"breakpoints of user {s} must end at {targets[s]}")
    L = len(bps)
    cur = np.zeros(L)
    pts = [cur.copy()]
    for t in range(t_max):
        for s in range(L):
            cur[s] = bps[s][t]
            pts.append(cur.copy())
    curve = FeasibleCurve(np.array(pts))
    if cfg is not None:
        curve.feasible = np.array([is_feasible(p, cfg) for p in curve.points])
    return curve


def curve_feasible(curve: FeasibleCurve, cfg: AnalysisConfig, per_segment=20) -> bool:
    return all(is_feasible(p, cfg) for p in curve.sample(per_segment))


def straighten_curve(curve: FeasibleCurve, cfg: AnalysisConfig | None = None, check=True,
                     max_sweeps=20_000, tol=1e-11) -> FeasibleCurve:
    """Make a feasible polyline coordinatewise non-decreasing with the same endpoints.

    Each coordinate is held at its running maximum whenever it would fall
    back, which splices a constant piece from every local maximum to the
    next time the coordinate regains that level.  Raising a coordinate only
    raises the other users' f, so the result stays feasible.

    If the curve overshoots its endpoint in some coordinate, the running
    maximum ends beyond it.  Clipping there can break another user's
    constraint, so instead the endpoint is approached by a capped
    coordinate staircase ``u_s <- min(end_s, f_s(u))``, which needs ``cfg``.
    """
    P = np.asarray(curve.points, dtype=float)
    if cfg is not None and check and not all(is_feasible(p, cfg) for p in P):
        raise InvalidArgumentError("straightening needs a feasible input curve")
    end = P[-1]
    run = P[0].copy()
    out = [run.copy()]
    for a, b in zip(P[:-1], P[1:]):
        lams = {1.0}
        for s in range(len(a)):
            if b[s] != a[s]:
                lam = (run[s] - a[s]) / (b[s] - a[s])
                if 0.0 < lam < 1.0:
                    lams.add(lam)
        for lam in sorted(lams):
            run = np.maximum(run, a + lam * (b - a))
            out.append(run.copy())
    pts = np.array(out)
    if np.any(pts[-1] > end + 1e-15):
        pts = _capped_staircase(P[0], end, cfg, max_sweeps, tol)
    keep = np.concatenate([[True], np.any(np.abs(np.diff(pts, axis=0)) > 0, axis=1)])
    keep[-1] = True
    return FeasibleCurve(pts[keep])


def _capped_staircase(start, end, cfg, max_sweeps, tol):
    if cfg is None:
        raise InvalidArgumentError("a curve that overshoots its endpoint needs cfg to be straightened")
    u = np.minimum(np.asarray(start, dtype=float), end)
    pts = [u.copy()]
    for _ in range(max_sweeps):
        before = u.copy()
        for s in range(cfg.L):
            u[s] = max(u[s], min(end[s], little_f(s, u, cfg)))
            pts.append(u.copy())
        gap = float(np.max(end - u))
        if gap <= tol:
            break
        if np.max(u - before) <= tol * 1e-3:
            raise InvalidArgumentError(f"no increasing feasible curve reaches the endpoint (gap {gap:.3g})")
    else:
        raise InvalidArgumentError("capped staircase did not reach the endpoint")
    for s in range(cfg.L):
        u[s] = end[s]
        pts.append(u.copy())
    return np.array(pts)
