"""Verification oracles and property suites.

Each suite returns a list of :class:`CheckResult`.  The suites are used by
``sapg check`` and by the test-suite; all randomness flows from an explicit
seed.
"""

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .feasible_set import Box, BoxBudgetSet
from .linalg import log_sum_exp
from .smoothing import FiniteMaxObjective, QuadraticObjective
from .solvers import Algorithm, SolverConfig, a_sequence, lyapunov_series, run, theorem_bound

__all__ = [
    "CheckResult",
    "active_set_projection",
    "random_feasible_points",
    "finite_difference_gradient",
    "grad_suite",
    "projection_suite",
    "smoothing_suite",
    "a_sequence_check",
    "one_dimensional_instance",
    "box_quadratic_instance",
    "lyapunov_suite",
    "smooth_recovery_check",
    "surrogate_optimum",
    "SUITES",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}: worst {self.worst:.3e} (tol {self.tol:.1e})"
        return f"{text}  {self.detail}" if self.detail else text


def _result(name, worst, tol, detail=""):
    return CheckResult(name, bool(worst <= tol), float(worst), float(tol), detail)


# ---------------------------------------------------------------------------
# projection


def active_set_projection(lengths, volume_budget, lower_bound, y):
    """Projection onto ``{x >= x_min, l @ x <= V0}`` by exhaustive enumeration.

    Every face of the set is described by the components held at ``x_min``
    and by whether the budget is tight.  The projection onto the affine hull
    of each face has a closed form; the nearest feasible candidate over all
    ``2^(m+1)`` faces is the projection.  Exponential in ``m``; meant for
    ``m <= 10``.
    """
    l = np.asarray(lengths, dtype=float)
    y = np.asarray(y, dtype=float)
    m = l.size
    masks = np.array(list(itertools.product((False, True), repeat=m)), dtype=bool)  # True = at x_min
    cand_free = np.where(masks, lower_bound, y)
    free = ~masks
    lf = np.where(free, l, 0.0)
    ll = np.sum(lf * lf, axis=1)
    pinned = lower_bound * np.sum(np.where(masks, l, 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = (np.sum(lf * y, axis=1) + pinned - volume_budget) / ll
    theta = np.where(ll > 0, theta, 0.0)
    cand_tight = np.where(masks, lower_bound, y - theta[:, None] * l)
    cands = np.vstack([cand_free, cand_tight])
    scale = max(1.0, volume_budget, float(np.max(np.abs(y))))
    ok = (np.min(cands - lower_bound, axis=1) >= -1e-13 * scale) & (cands @ l - volume_budget <= 1e-13 * scale)
    cands = cands[ok]
    d = np.sum((cands - y) ** 2, axis=1)
    return cands[int(np.argmin(d))]


def _random_box_budget(rng, m):
    l = rng.uniform(0.2, 3.0, m)
    xmin = rng.uniform(1e-3, 0.5)
    V0 = xmin * l.sum() * (1.0 + rng.uniform(0.0, 4.0))
    return BoxBudgetSet(l, V0, xmin)


def projection_suite(seed=42, trials=1000, max_dim=6, tol=1e-10, tol_geometry=1e-12):
    """Breakpoint projection vs the active-set oracle, plus idempotence and nonexpansiveness.

    For every size ``m = 1..max_dim`` draws `trials` random sets with a
    random point each (mixtures of points inside, near and far from the set).
    """
    rng = np.random.default_rng(seed)
    dev = idem = expand = obtuse = 0.0
    for m in range(1, max_dim + 1):
        for _ in range(trials):
            S = _random_box_budget(rng, m)
            spread = rng.choice([0.5, 2.0, 10.0])
            y = S.lower_bound + spread * rng.normal(size=m) * S.volume_budget / S.lengths.sum()
            y2 = y + rng.normal(size=m) * spread * 0.1
            p = S.project(y)
            q = active_set_projection(S.lengths, S.volume_budget, S.lower_bound, y)
            dev = max(dev, float(np.max(np.abs(p - q))))
            idem = max(idem, float(np.max(np.abs(S.project(p) - p))))
            p2 = S.project(y2)
            expand = max(expand, float(np.linalg.norm(p - p2) - np.linalg.norm(y - y2)))
            # (y - P y) . (w - P y) <= 0 for any w in the set
            w = S.interior_point()
            obtuse = max(obtuse, float((y - p) @ (w - p)))
    return [
        _result("projection matches active-set oracle", dev, tol, f"m=1..{max_dim}, {trials} draws each"),
        _result("projection idempotent", idem, tol_geometry),
        _result("projection nonexpansive", max(expand, 0.0), tol_geometry),
        _result("projection obtuse-angle condition", max(obtuse, 0.0), tol_geometry),
    ]


# ---------------------------------------------------------------------------
# gradient and smoothing on a truss (or any box-budget) instance


def random_feasible_points(fset, count, rng, spread=(0.1, 1.0)):
    """Feasible points with every component well above the lower bound.

    Each point spends a random fraction in [0.5, 1] of the budget on random
    positive weights.
    """
    l = fset.lengths
    pts = []
    for _ in range(count):
        u = rng.uniform(*spread, size=fset.dimension)
        frac = rng.uniform(0.5, 1.0)
        x = np.maximum(fset.lower_bound, frac * fset.volume_budget * u / (l @ u))
        pts.append(fset.project(x))
    return pts


_STENCILS = {
    2: ((1, 0.5),),
    4: ((1, 8.0 / 12.0), (2, -1.0 / 12.0)),
    6: ((1, 45.0 / 60.0), (2, -9.0 / 60.0), (3, 1.0 / 60.0)),
}


def finite_difference_gradient(func, x, step=None, rel_step=None, order=2):
    """Central-difference gradient of `func` at `x`.

    The step of component ``j`` is ``step`` if given, else
    ``rel_step * |x_j|``, else ``1e-6 * max(1, |x|)``.  `order` selects the
    2-, 4- or 6-point symmetric stencil.  `func` may return an array; the
    result then has one column per output so several functions can share
    evaluations.
    """
    x = np.asarray(x, dtype=float)
    if order not in _STENCILS:
        raise ValueError(f"order must be one of {sorted(_STENCILS)}")
    rows = []
    for j in range(x.size):
        if step is not None:
            h = step
        elif rel_step is not None:
            h = rel_step * abs(x[j])
        else:
            h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
        e = np.zeros_like(x)
        e[j] = h
        acc = 0.0
        for s, w in _STENCILS[order]:
            acc = acc + w * (np.asarray(func(x + s * e), dtype=float) - np.asarray(func(x - s * e), dtype=float))
        rows.append(acc / h)
    return np.array(rows)


def grad_suite(problem, seed=42, points=20, mus=(1.0, 0.1, 0.01), tol=1e-5):
    """Analytic smoothed gradient against central finite differences.

    The error of component ``j`` is ``|g_j - fd_j| / max(|g_j|, |fd_j|)``,
    taken as zero when both vanish (bars whose ends are all supported carry
    no stiffness, so their derivative is exactly zero).

    Truss gradients span six or more orders of magnitude across bars, so a
    plain central difference is swamped by rounding on the small
    components.  The reference uses the six-point stencil with a step of 5%
    of each area, which keeps both rounding and truncation below ``1e-6``.
    """
    obj, fset = problem.objective, problem.feasible
    rng = np.random.default_rng(seed)
    n = obj.order

    def smoothed(x):
        lam = obj.eigenvalues(x)
        return [log_sum_exp(lam, mu) - mu * math.log(n) for mu in mus]

    worst = 0.0
    for x in random_feasible_points(fset, points, rng):
        fd = finite_difference_gradient(smoothed, x, rel_step=0.05, order=6)
        for i, mu in enumerate(mus):
            g = obj.grad_smoothed(x, mu)
            denom = np.maximum(np.abs(g), np.abs(fd[:, i]))
            err = np.divide(np.abs(g - fd[:, i]), denom, out=np.zeros_like(g), where=denom > 0)
            worst = max(worst, float(np.max(err)))
    return [_result("smoothed gradient vs finite differences", worst, tol, f"{points} points, mu in {list(mus)}")]


def smoothing_suite(problem, seed=42, points=100, mus=(2.0, 1.0, 0.5, 0.1, 0.01, 0.0), tol=1e-10):
    """``0 <= f_{mu2} - f_{mu1} <= beta (mu1 - mu2)`` for every ``mu1 > mu2``."""
    obj, fset = problem.objective, problem.feasible
    beta = obj.constants.beta
    rng = np.random.default_rng(seed)
    lower = upper = -math.inf
    mus = sorted(mus, reverse=True)
    for x in random_feasible_points(fset, points, rng):
        vals = {mu: obj.eval_smoothed(x, mu) for mu in mus}
        for mu1, mu2 in itertools.combinations(mus, 2):
            diff = vals[mu2] - vals[mu1]
            lower = max(lower, -diff)
            upper = max(upper, diff - beta * (mu1 - mu2))
    return [
        _result("smoothing monotone in mu", lower, 0.0, f"{points} points"),
        _result("smoothing gap within beta * dmu", upper, tol, f"beta = log n = {beta:.6g}"),
    ]


# ---------------------------------------------------------------------------
# step sequence and Lyapunov diagnostics


def a_sequence_check(K=10**6, tol=1e-12):
    """Recurrence residual and the linear envelope ``k/2 <= a_k <= 3k/2``.

    The residual ``a_{k+1}^2 - a_{k+1} - a_k^2`` is divided by ``a_{k+1}^2``
    so that it is measured at the scale of the terms, which grow like ``k^2``.
    """
    a = a_sequence(K)
    a0, a1 = a[:-1], a[1:]
    resid = float(np.max(np.abs((a1 - a0) * (a1 + a0) - a1) / (a1 * a1)))
    k = np.arange(1, K + 1)
    ak = a[1:]
    envelope = float(max(np.max(k / 2 - ak), np.max(ak - 1.5 * k), 0.0))
    return [
        _result("a-sequence recurrence residual (scaled)", resid, tol, f"k <= {K}"),
        _result("a-sequence within [k/2, 3k/2]", envelope, 0.0),
    ]


def one_dimensional_instance():
    """``f(x) = |x|`` on ``[-1, 2]`` smoothed by log-sum-exp; ``x* = 0``, ``f* = 0``."""
    obj = FiniteMaxObjective([[1.0], [-1.0]])
    fset = Box([-1.0], [2.0])
    return obj, fset, np.array([1.7]), np.array([0.0]), 0.0


def box_quadratic_instance(m=8, seed=0):
    """A convex quadratic over ``[0, 1]^m`` whose minimizer is built in.

    ``x*`` has components at both bounds and in the interior; ``c`` is chosen
    so the KKT conditions hold at ``x*`` with strictly complementary
    multipliers.  ``H`` is rank deficient, so the problem is not strongly
    convex.
    """
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(m - 2, m))
    H = G.T @ G / m
    xstar = rng.uniform(0.2, 0.8, m)
    g = np.zeros(m)
    xstar[: m // 4] = 0.0
    g[: m // 4] = rng.uniform(0.5, 1.5, m // 4)
    xstar[m // 4 : m // 2] = 1.0
    g[m // 4 : m // 2] = -rng.uniform(0.5, 1.5, m // 2 - m // 4)
    c = g - H @ xstar
    obj = QuadraticObjective(H, c)
    fset = Box(np.zeros(m), np.ones(m))
    x0 = np.full(m, 0.5) + 0.4 * np.sign(rng.normal(size=m))
    return obj, fset, x0, xstar, obj.eval_nonsmooth(xstar)


def _run_with_states(obj, fset, x0, iters, **kwargs):
    cfg = SolverConfig(algorithm=Algorithm.SAPG, max_iters=iters, keep_states=True, **kwargs)
    return run(cfg, obj, fset, x0)


def lyapunov_suite(iters=2000):
    """Lyapunov increments and the theorem bound on instances with exact ``x*``."""
    results = []
    obj, fset, x0, xstar, fstar = one_dimensional_instance()
    trace = _run_with_states(obj, fset, x0, iters, mu0=1.0, L=obj.constants.L, Lprime=0.0)
    results += _lyapunov_results("1-D |x|", trace, obj, xstar, fstar)

    obj, fset, x0, xstar, fstar = box_quadratic_instance()
    trace = _run_with_states(obj, fset, x0, iters, mu0=1.0, L=0.0, Lprime=obj.constants.Lprime)
    results += _lyapunov_results("box quadratic", trace, obj, xstar, fstar)
    return results


def _lyapunov_results(label, trace, obj, xstar, fstar):
    diag = lyapunov_series(trace, obj, xstar, fstar)
    lemma = float(max(np.max(diag.lemma_excess), 0.0))
    mono = float(max(np.max(diag.monotone_excess), 0.0))
    gaps = trace.objective_values[1:] - fstar
    bound_excess = float(max(np.max(gaps - diag.bound_rhs[1:]), 0.0))
    return [
        _result(f"{label}: E increments within allowance", lemma, diag.tol, f"{len(diag.lemma_violations)} violations"),
        _result(f"{label}: Etilde nonincreasing", mono, diag.tol, f"{len(diag.monotone_violations)} violations"),
        _result(f"{label}: gap within theorem bound", bound_excess, 0.0),
    ]


def smooth_recovery_check(iters=10**4):
    """With ``L = 0`` the bound is ``2 Lprime |x0 - x*|^2 / k^2`` at every ``k``."""
    obj, fset, x0, xstar, fstar = box_quadratic_instance()
    cfg = SolverConfig(algorithm=Algorithm.SAPG, mu0=1.0, L=0.0, Lprime=obj.constants.Lprime, max_iters=iters)
    trace = run(cfg, obj, fset, x0)
    d = float(np.linalg.norm(x0 - xstar))
    k = trace.ks[1:]
    bound = np.array([theorem_bound(int(i), cfg, d, 0.0) for i in k])
    # relative slack against rounding in f(x_k) - f*
    excess = trace.objective_values[1:] - fstar - bound
    worst = float(max(np.max(excess), 0.0))
    return [_result("smooth recovery: gap <= 2 L' d^2 / k^2", worst, 0.0, f"k = 1..{iters}")]


def surrogate_optimum(problem, config, iterations=40000, stride=100):
    """Long S-APG run used as a stand-in for the unknown optimum.

    Returns ``(x_hat, f_hat, drift)`` where ``f_hat`` is the smallest
    recorded objective value, ``x_hat`` the final iterate, and ``drift`` the
    decrease of the recorded values over the second half of the run, an
    estimate of how far ``f_hat`` still is from the optimum.
    """
    cfg = replace(config, algorithm=Algorithm.SAPG, max_iters=iterations, trace_every=stride, keep_states=False)
    trace = run(cfg, problem.objective, problem.feasible, problem.initial_design())
    xhat = trace.final_state.x
    vals = trace.objective_values
    fhat = float(min(np.min(vals), problem.objective.eval_nonsmooth(xhat)))
    half = trace.ks >= iterations // 2
    drift = float(np.max(vals[half]) - fhat) if np.any(half) else 0.0
    return xhat, fhat, drift


SUITES = ("grad", "project", "smoothing", "lyapunov")
