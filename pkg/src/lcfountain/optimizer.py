"""Degree-distribution design by alternating linear programs over a zig-zag relaxation.

With the staircase breakpoints and every other user's distribution fixed,
each user's constraints

    den_s(t) * Ψ_s'(x) + θ_s ln(1 - x) >= 0,   x in (x_s[t-1], x_s[t]]

are linear in (Ψ_s, θ_s), and the other users' constraints are linear in
Ψ_s because their denominators are affine in Ψ_s(x_s[.]).  One LP per
user, cycled, never lowers the objective.  Breakpoints are then re-derived
as the greedy staircase at slightly inflated θ, which gives the next round
of LPs room to grow.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import linprog

from .analysis import SLACK, AnalysisConfig, denominator_coeffs, eval_multilinear, zigzag_curve
from .channel import TransferMatrixDistribution, rate_region_bounds
from .errors import ConfigurationError
from .lt import DegreeDistribution


def degree_cap(eta: float) -> int:
    """Largest useful degree for target fraction ``eta``."""
    return math.ceil(1.0 / (1.0 - eta) - 1e-12) - 1


def degree_cap_transform(psi: DegreeDistribution, eta: float) -> DegreeDistribution:
    """Fold all mass at degrees >= cap into the cap degree."""
    cap = degree_cap(eta)
    if psi.max_degree <= cap:
        return psi
    p = np.zeros(cap)
    p[: cap - 1] = psi.probs[: cap - 1]
    p[cap - 1] = psi.probs[cap - 1:].sum()
    return DegreeDistribution(p, tol=max(psi.tol, 1e-9))


@dataclass
class OptimizationProblem:
    """Maximize the weighted rate sum ``sum_{s in optimized} eta_s θ_s``.

    Users not in ``optimized`` keep θ at ``fixed_theta[s]``.  ``kind`` is
    the LIF the decoder uses (``"star"`` batched, ``"o"`` ordinary BP).
    """

    g: TransferMatrixDistribution
    eta: list
    optimized: list | None = None
    fixed_theta: dict = dc_field(default_factory=dict)
    kind: str = "star"
    t_max: int = 20
    M: int = 20
    D: list | None = None

    def __post_init__(self):
        L = self.g.L
        if L not in (2, 3):
            raise ConfigurationError("the optimizer handles L = 2 and L = 3")
        if len(self.eta) != L or not all(0 < e < 1 for e in self.eta):
            raise ConfigurationError("need one target eta in (0, 1) per user")
        if self.t_max < 1 or self.M < 2:
            raise ConfigurationError("need t_max >= 1 and M >= 2")
        if self.optimized is None:
            self.optimized = [s for s in range(L) if s not in self.fixed_theta]
        for s in range(L):
            if (s in self.optimized) == (s in self.fixed_theta):
                raise ConfigurationError(f"user {s} must be either optimized or fixed")
        if self.D is None:
            self.D = [degree_cap(e) for e in self.eta]
        self.den = denominator_coeffs(self.g, self.kind)

    @property
    def L(self):
        return self.g.L

    def objective(self, theta):
        return float(sum(self.eta[s] * theta[s] for s in self.optimized))


@dataclass
class OptimizationResult:
    theta: list
    psis: list
    breakpoints: np.ndarray
    objective: float
    status: str  # verified | repaired | infeasible
    shrink: float = 1.0
    certified: bool = False
    history: list = dc_field(default_factory=list)

    def rates(self, problem):
        return [problem.eta[s] * self.theta[s] for s in range(problem.L)]

    def to_dict(self, problem=None):
        out = {
            "theta": list(map(float, self.theta)),
            "objective": self.objective,
            "status": self.status,
            "shrink": self.shrink,
            "certified": self.certified,
            "psis": [p.as_pairs() for p in self.psis],
            "breakpoints": np.asarray(self.breakpoints).tolist(),
        }
        if problem is not None:
            out["rates"] = self.rates(problem)
        return out


# -- staircase geometry ------------------------------------------------------


def _full_bp(bps):
    return np.hstack([np.zeros((bps.shape[0], 1)), bps])


def step_positions(bps, s, t):
    """Other users' fractions when user s advances at step t (1-based)."""
    full = _full_bp(bps)
    return [full[r, t] if r < s else full[r, t - 1] for r in range(bps.shape[0])]


def _den(problem, s, y, psis):
    p = [psis[r](y[r]) if r != s else 0.0 for r in range(problem.L)]
    return eval_multilinear(problem.den[s], p)


def _seg_points(a, b, M):
    return a + (b - a) * np.arange(1, M + 1) / M


# -- the linear program ------------------------------------------------------


@dataclass
class LinearSystem:
    A_ub: np.ndarray
    b_ub: np.ndarray
    c: np.ndarray
    bounds: list
    A_eq: np.ndarray
    b_eq: np.ndarray
    counts: dict


def relaxed_constraints(problem: OptimizationProblem, bps, psis, theta, u) -> LinearSystem:
    """LP over ``[ψ_u[1..D_u], θ_u]`` with breakpoints and the other users fixed."""
    L, D, M = problem.L, problem.D[u], problem.M
    full = _full_bp(bps)
    degs = np.arange(1, D + 1)
    rows, rhs = [], []
    counts = {"own": 0, "others": 0, "simplex": 1}
    help_obj = np.zeros(D)
    for t in range(1, bps.shape[1] + 1):
        # own segment
        a, b = full[u, t - 1], full[u, t]
        if b > a:
            den = _den(problem, u, step_positions(bps, u, t), psis)
            for x in _seg_points(a, b, M):
                row = np.empty(D + 1)
                row[:D] = -den * degs * x ** (degs - 1)
                row[D] = -math.log1p(-x)
                rows.append(row)
                rhs.append(0.0)
                counts["own"] += 1
        # other users' segments, whose denominators move with Ψ_u
        for r in range(L):
            if r == u:
                continue
            a, b = full[r, t - 1], full[r, t]
            if b <= a:
                continue
            y = step_positions(bps, r, t)
            yu = y[u]
            p = [psis[k](y[k]) if k != r else 0.0 for k in range(L)]
            p[u] = 0.0
            A0 = eval_multilinear(problem.den[r], p)
            p[u] = 1.0
            B1 = eval_multilinear(problem.den[r], p) - A0
            powers = yu ** degs
            help_obj += B1 * powers
            for x in _seg_points(a, b, M):
                dr = psis[r].derivative(x)
                row = np.zeros(D + 1)
                row[:D] = -B1 * dr * powers
                rows.append(row)
                rhs.append(A0 * dr + theta[r] * math.log1p(-x))
                counts["others"] += 1
    A_ub = np.array(rows) if rows else np.zeros((0, D + 1))
    c = np.zeros(D + 1)
    if u in problem.optimized:
        c[D] = -problem.eta[u]
        bounds = [(0, None)] * D + [(0, None)]
    elif theta[u] < problem.fixed_theta[u] - 1e-12:
        # still climbing to the pinned rate
        c[D] = -1.0
        bounds = [(0, None)] * D + [(0, problem.fixed_theta[u])]
    else:
        # θ_u is pinned; spend the freedom on the other users' denominators
        c[:D] = -help_obj / max(1.0, np.abs(help_obj).max())
        bounds = [(0, None)] * D + [(theta[u], theta[u])]
    A_eq = np.zeros((1, D + 1))
    A_eq[0, :D] = 1.0
    return LinearSystem(A_ub, np.array(rhs), c, bounds, A_eq, np.ones(1), counts)


def lp_step(problem, bps, psis, theta, u):
    """Best (Ψ_u, θ_u) for fixed breakpoints and other users; None if the LP fails."""
    sysm = relaxed_constraints(problem, bps, psis, theta, u)
    res = linprog(sysm.c, A_ub=sysm.A_ub, b_ub=sysm.b_ub, A_eq=sysm.A_eq, b_eq=sysm.b_eq,
                  bounds=sysm.bounds, method="highs")
    if res.status != 0:
        return None
    D = problem.D[u]
    p = np.clip(res.x[:D], 0.0, None)
    p[p < 1e-12] = 0.0
    return DegreeDistribution(p / p.sum()), float(max(0.0, res.x[D]))


def max_theta(problem, bps, psis, points=None):
    """Largest θ_s meeting every interpolated constraint, per user, for fixed Ψ's."""
    M = points or problem.M
    full = _full_bp(bps)
    out = []
    for s in range(problem.L):
        best = np.inf
        for t in range(1, bps.shape[1] + 1):
            a, b = full[s, t - 1], full[s, t]
            if b <= a:
                continue
            den = _den(problem, s, step_positions(bps, s, t), psis)
            xs = _seg_points(a, b, M)
            best = min(best, float(np.min(den * psis[s].derivative(xs) / -np.log1p(-xs))))
        out.append(max(0.0, best) if np.isfinite(best) else 1.0)
    return out


def joint_step(problem, bps, psis, theta, radius):
    """One trust-region LP over every user's Ψ and θ, bilinear terms linearized.

    Returns candidate distributions (θ must be re-derived exactly) or None.
    """
    L, M = problem.L, problem.M
    full = _full_bp(bps)
    offs = np.concatenate([[0], np.cumsum([d + 1 for d in problem.D])])
    nvar = int(offs[-1])
    rows, rhs = [], []
    for s in range(L):
        Ds = problem.D[s]
        degs = np.arange(1, Ds + 1)
        for t in range(1, bps.shape[1] + 1):
            a, b = full[s, t - 1], full[s, t]
            if b <= a:
                continue
            y = step_positions(bps, s, t)
            p = [psis[r](y[r]) if r != s else 0.0 for r in range(L)]
            den0 = eval_multilinear(problem.den[s], p)
            grads = {}
            for r in range(L):
                if r == s:
                    continue
                hi, lo = list(p), list(p)
                hi[r], lo[r] = 1.0, 0.0
                grads[r] = eval_multilinear(problem.den[s], hi) - eval_multilinear(problem.den[s], lo)
            xs = _seg_points(a, b, M)
            d0 = psis[s].derivative(xs)
            blk = np.zeros((M, nvar))
            blk[:, offs[s]:offs[s] + Ds] = -den0 * degs * xs[:, None] ** (degs - 1)
            blk[:, offs[s] + Ds] = -np.log1p(-xs)
            const = np.zeros(M)
            for r, gr in grads.items():
                Dr = problem.D[r]
                pw = y[r] ** np.arange(1, Dr + 1)
                blk[:, offs[r]:offs[r] + Dr] -= gr * d0[:, None] * pw
                const -= gr * d0 * psis[r](y[r])
            rows.append(blk)
            rhs.append(-const)
    c = np.zeros(nvar)
    bounds = []
    A_eq = np.zeros((L, nvar))
    for s in range(L):
        Ds = problem.D[s]
        cur = np.zeros(Ds)
        cur[: min(Ds, psis[s].max_degree)] = psis[s].probs[:Ds]
        bounds += [(max(0.0, v - radius), v + radius) for v in cur]
        if s in problem.optimized:
            c[offs[s] + Ds] = -problem.eta[s]
            bounds.append((0, None))
        else:
            bounds.append((problem.fixed_theta[s], problem.fixed_theta[s]))
        A_eq[s, offs[s]:offs[s] + Ds] = 1.0
    res = linprog(c, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), A_eq=A_eq, b_eq=np.ones(L),
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    out = []
    for s in range(L):
        v = np.clip(res.x[offs[s]:offs[s] + problem.D[s]], 0.0, None)
        v[v < 1e-12] = 0.0
        out.append(DegreeDistribution(v / v.sum()))
    return out


def joint_ascent(problem, bps, psis, theta, radius=0.05, min_radius=1e-4, max_steps=40):
    """Trust-region loop around ``joint_step``; accepts only objective gains."""
    obj = problem.objective(theta)
    for _ in range(max_steps):
        if radius < min_radius:
            break
        cand = joint_step(problem, bps, psis, theta, radius)
        if cand is None:
            radius *= 0.5
            continue
        th = max_theta(problem, bps, cand)
        if any(th[s] < v - 1e-12 for s, v in problem.fixed_theta.items()):
            radius *= 0.5
            continue
        new_theta = [th[s] if s in problem.optimized else theta[s] for s in range(problem.L)]
        new_obj = problem.objective(new_theta)
        if new_obj > obj + 1e-9:
            psis, theta, obj = cand, new_theta, new_obj
            radius = min(0.5, radius * 1.5)
        else:
            radius *= 0.5
    return psis, theta


# -- breakpoints -------------------------------------------------------------


def _advance(psi, ratio, start, eta, points=256, xtol=1e-10, slack=1e-9):
    """Largest x in [start, eta] with Ψ'(z) + ratio ln(1-z) >= -slack on [start, x]."""
    if ratio <= 0:
        return eta
    xs = np.linspace(start, eta, points)
    vals = psi.derivative(xs) + ratio * np.log1p(-xs)
    bad = np.nonzero(vals < -slack)[0]
    if bad.size == 0:
        return eta
    k = bad[0]
    if k == 0:
        return start
    a, b = xs[k - 1], xs[k]
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if psi.derivative(mid) + ratio * math.log1p(-mid) < -slack:
            b = mid
        else:
            a = mid
    return a


def greedy_breakpoints(problem, psis, theta, lam=1.0):
    """Staircase where each user covers a fraction ``lam`` of its allowed advance.

    ``lam = 1`` is the greedy staircase (largest feasible steps).  A user
    whose allowed advance reaches its target jumps straight there.  Returns
    None when the targets are not reached within t_max steps.
    """
    L, t_max = problem.L, problem.t_max
    eta = np.asarray(problem.eta, dtype=float)
    cur = np.zeros(L)
    bps = np.zeros((L, t_max))
    for t in range(t_max):
        moved = False
        for s in range(L):
            den = _den(problem, s, cur, psis)
            if den <= 0:
                return None
            reach = _advance(psis[s], theta[s] / den, cur[s], eta[s])
            nxt = eta[s] if reach >= eta[s] else cur[s] + lam * (reach - cur[s])
            moved |= nxt > cur[s] + 1e-12
            cur[s] = nxt
            bps[s, t] = nxt
        if np.all(cur >= eta - 1e-12):
            bps[:, t:] = eta[:, None]
            return bps
        if not moved:
            return None
    return None


def refine_staircase(bps, t_max):
    """Spend unused steps by splitting the largest step at every user's midpoint.

    Splitting keeps a feasible staircase feasible: each user still covers
    the same segment, only with the others at least as far along.
    """
    eta = bps[:, -1]
    used = int(np.argmax(np.all(bps >= eta[:, None] - 1e-12, axis=0))) + 1
    cols = [c for c in _full_bp(bps[:, :used]).T]
    while len(cols) - 1 < t_max:
        steps = [np.max(b - a) for a, b in zip(cols[:-1], cols[1:])]
        k = int(np.argmax(steps))
        cols.insert(k + 1, 0.5 * (cols[k] + cols[k + 1]))
    return np.array(cols[1:]).T


def update_breakpoints(problem, psis, theta, bps, steps=12):
    """Finest fractional staircase that still reaches the targets, refined to t_max steps."""
    best = greedy_breakpoints(problem, psis, theta, 1.0)
    if best is None:
        return bps
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        cand = greedy_breakpoints(problem, psis, theta, mid)
        if cand is None:
            lo = mid
        else:
            hi, best = mid, cand
    return refine_staircase(best, problem.t_max)


def initial_breakpoints(problem, rng):
    """Jittered near-uniform monotone grids ending at the targets.

    Very short opening steps let the LP drop degree one entirely, after
    which that user can never leave the origin; near-uniform grids avoid it.
    """
    L, t_max = problem.L, problem.t_max
    bps = np.zeros((L, t_max))
    for s in range(L):
        inc = rng.uniform(0.7, 1.3, t_max)
        grid = np.cumsum(inc) / inc.sum()
        bps[s] = problem.eta[s] * grid ** rng.uniform(0.85, 1.15)
        bps[s, -1] = problem.eta[s]
    return bps


def perturb_breakpoints(problem, bps, rng, sigma=0.3):
    L = problem.L
    out = np.empty_like(bps)
    for s in range(L):
        inc = np.diff(np.concatenate([[0.0], bps[s]]))
        inc = inc * np.exp(sigma * rng.standard_normal(inc.size)) + 1e-6
        out[s] = problem.eta[s] * np.cumsum(inc) / inc.sum()
        out[s, -1] = problem.eta[s]
    return out


# -- verification ------------------------------------------------------------


def segment_margins(problem, bps, psis, theta, points=1000):
    """Minimum of den * Ψ_s' + θ_s ln(1-x) over each user's segments, on a dense grid."""
    full = _full_bp(bps)
    out = []
    for s in range(problem.L):
        worst = np.inf
        for t in range(1, bps.shape[1] + 1):
            a, b = full[s, t - 1], full[s, t]
            if b <= a:
                continue
            den = _den(problem, s, step_positions(bps, s, t), psis)
            xs = _seg_points(a, b, points)
            worst = min(worst, float(np.min(den * psis[s].derivative(xs) + theta[s] * np.log1p(-xs))))
        out.append(worst)
    return out


def verify(result: OptimizationResult, problem: OptimizationProblem, dense_points=1000,
           shrink=0.999, floor=0.5) -> OptimizationResult:
    """Dense re-check of every segment; shrink violating θ's until they pass."""
    theta = list(result.theta)
    if any(theta[s] < v - 1e-9 for s, v in problem.fixed_theta.items()):
        return OptimizationResult(theta, result.psis, result.breakpoints, 0.0, "infeasible", 1.0,
                                  False, result.history)
    orig = list(theta)
    factor = 1.0
    margins = segment_margins(problem, result.breakpoints, result.psis, theta, dense_points)
    status = "verified"
    while any(m < -SLACK for m in margins):
        status = "repaired"
        factor *= shrink
        if factor < floor:
            return OptimizationResult(theta, result.psis, result.breakpoints, 0.0, "infeasible", factor,
                                      False, result.history)
        for s in range(problem.L):
            if margins[s] < -SLACK and s in problem.optimized:
                theta[s] = orig[s] * factor
        margins = segment_margins(problem, result.breakpoints, result.psis, theta, dense_points)
        if any(m < -SLACK for s, m in enumerate(margins) if s not in problem.optimized):
            return OptimizationResult(theta, result.psis, result.breakpoints, 0.0, "infeasible", factor,
                                      False, result.history)
    out = OptimizationResult(theta, result.psis, result.breakpoints, problem.objective(theta), status,
                             factor, False, result.history)
    out.certified = certify(out, problem)
    return out


def certify(result: OptimizationResult, problem: OptimizationProblem) -> bool:
    """Every zig-zag vertex is feasible under the analysis module's f_s."""
    cfg = AnalysisConfig(problem.g, result.psis, [max(t, 1e-12) for t in result.theta], problem.kind)
    curve = zigzag_curve(list(result.breakpoints), problem.eta, cfg)
    return bool(np.all(curve.feasible))


def within_bounds(result: OptimizationResult, problem: OptimizationProblem, tol=1e-6) -> bool:
    beta = problem.g.beta()
    rates = result.rates(problem)
    return all(sum(rates[s] for s in S) <= bound / beta + tol for S, bound in rate_region_bounds(problem.g))


# -- search ------------------------------------------------------------------


def _lp_cycle(problem, bps, psis, theta, passes=4, tol=1e-7):
    obj = problem.objective(theta)
    order = list(problem.optimized) + [s for s in range(problem.L) if s not in problem.optimized]
    for _ in range(passes):
        for u in order:
            got = lp_step(problem, bps, psis, theta, u)
            if got is None:
                continue
            psi_u, th_u = got
            trial_theta = list(theta)
            trial_theta[u] = th_u if u in problem.optimized else max(theta[u], min(th_u, problem.fixed_theta[u]))
            trial_psis = list(psis)
            trial_psis[u] = psi_u
            if problem.objective(trial_theta) + 1e-12 >= problem.objective(theta):
                psis, theta = trial_psis, trial_theta
        new = problem.objective(theta)
        if new - obj < tol:
            break
        obj = new
    return psis, theta


def single_run(problem: OptimizationProblem, rng, outer=30, perturbations=6, joint=True) -> OptimizationResult:
    L = problem.L
    theta = [0.0] * L  # pinned users climb to their rate inside the LP cycle
    psis = [DegreeDistribution(rng.dirichlet(np.ones(problem.D[s]))) for s in range(L)]
    bps = initial_breakpoints(problem, rng)
    psis, theta = _lp_cycle(problem, bps, psis, theta)
    history = [problem.objective(theta)]
    stall = 0
    for _ in range(outer):
        bps = update_breakpoints(problem, psis, theta, bps)
        psis, theta = _lp_cycle(problem, bps, psis, theta)
        if joint:
            psis, theta = joint_ascent(problem, bps, psis, theta)
        history.append(problem.objective(theta))
        stall = stall + 1 if history[-1] - history[-2] < 1e-5 else 0
        if stall >= 2:
            break
    best = (psis, theta, bps)
    for _ in range(perturbations):
        cand_bps = perturb_breakpoints(problem, best[2], rng)
        p2, t2 = _lp_cycle(problem, cand_bps, best[0], best[1])
        b2 = update_breakpoints(problem, p2, t2, cand_bps)
        p2, t2 = _lp_cycle(problem, b2, p2, t2)
        if problem.objective(t2) > problem.objective(best[1]) + 1e-7:
            best = (p2, t2, b2)
            history.append(problem.objective(t2))
    psis, theta, bps = best
    raw = OptimizationResult(theta, psis, bps, problem.objective(theta), "unverified", history=history)
    return verify(raw, problem)


def _run_seeded(args):
    problem, seed, kw = args
    return single_run(problem, np.random.default_rng(seed), **kw)


def solve(problem: OptimizationProblem, rng=None, restarts=20, workers=1, **kw) -> OptimizationResult:
    """Best verified result over independent restarts (infeasible status if none verifies)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    seeds = [int(x) for x in rng.integers(0, 2**63 - 1, size=restarts)]
    jobs = [(problem, sd, kw) for sd in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_seeded, jobs))
    else:
        results = [_run_seeded(j) for j in jobs]
    good = [r for r in results if r.status != "infeasible"]
    if not good:
        r = results[0]
        return OptimizationResult(r.theta, r.psis, r.breakpoints, 0.0, "infeasible", r.shrink)
    return max(good, key=lambda r: r.objective)
