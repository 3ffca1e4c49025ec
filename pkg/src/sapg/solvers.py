"""First-order solvers for ``min f(x) over S`` using smoothed gradients.

S-APG keeps three sequences.  With ``mu_k = mu0 / (k + 1)``,
``L_k = Lprime + L / mu_k`` and ``a_{k+1} = (1 + sqrt(4 a_k^2 + 1)) / 2``::

    y_k     = (1 - 1/a_{k+1}) x_k + (1/a_{k+1}) z_k
    z_{k+1} = P_S(z_k - (a_{k+1} / L_k) grad f_{mu_k}(y_k))
    x_{k+1} = (1 - 1/a_{k+1}) x_k + (1/a_{k+1}) z_{k+1}

``y`` and ``x`` are convex combinations of points of ``S`` and ``z`` is a
projection, so the objective is only ever evaluated on the feasible set.
The smoothed projected gradient (S-PG) and projected subgradient methods
are provided as baselines.
"""

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import InvalidIteration, MissingStates, NoConvergence, NotPositiveDefinite, NumericalBreakdown

log = logging.getLogger(__name__)

__all__ = [
    "Algorithm",
    "SolverConfig",
    "SolverState",
    "TraceRow",
    "IterateTrace",
    "LyapunovDiagnostics",
    "next_a",
    "a_sequence",
    "sapg_mu",
    "spg_mu",
    "subgrad_stepsize",
    "initial_state",
    "sapg_step",
    "spg_step",
    "subgrad_step",
    "run",
    "lyapunov_series",
    "theorem_bound",
]

FEASIBILITY_TOL = 1e-10


class Algorithm(str, enum.Enum):
    SAPG = "sapg"
    SPG = "spg"
    SUBGRAD = "subgrad"


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one solver run.

    ``L`` and ``Lprime`` set the step ``1 / L_k`` through
    ``L_k = Lprime + L / mu_k``.  ``subgrad_step_c`` is ``c`` in the
    subgradient stepsize ``c / sqrt(k)``.
    """

    algorithm: Algorithm = Algorithm.SAPG
    mu0: float = 1.0
    L: float = 1.0e5
    Lprime: float = 0.0
    max_iters: int = 4000
    subgrad_step_c: float = 1.0e-6
    spg_mu_exponent: float = -0.5
    trace_every: int = 1
    reference_optimum: Optional[float] = None
    keep_states: bool = False
    record_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")
        if self.L < 0 or self.Lprime < 0:
            raise ValueError("L and Lprime must be nonnegative")
        if self.algorithm is not Algorithm.SUBGRAD and self.L == 0 and not self.Lprime > 0:
            raise ValueError("L = 0 requires Lprime > 0")
        if not self.subgrad_step_c > 0:
            raise ValueError("subgrad_step_c must be positive")


@dataclass(frozen=True)
class SolverState:
    """Iterate ``k``.

    ``mu`` and ``L_k`` are the values used by the step leaving this state.
    ``y`` is the auxiliary point of the step that produced this state
    (``x0`` for the initial state), and ``step_norm`` is
    ``|z_k - z_{k-1}|``.
    """

    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a: float
    mu: float
    L_k: float
    step_norm: float = 0.0


@dataclass
class TraceRow:
    k: int
    f_x: float
    f_mu_x: float
    mu_k: float
    L_k: float
    a_k: float
    feas_residual_box: float
    feas_residual_budget: float
    step_norm: float
    time_s: Optional[float] = None
    e_k: Optional[float] = None
    etilde_k: Optional[float] = None
    bound_rhs: Optional[float] = None


@dataclass
class IterateTrace:
    algorithm: Algorithm
    config: SolverConfig
    rows: List[TraceRow] = field(default_factory=list)
    states: List[SolverState] = field(default_factory=list)
    max_box_residual: float = -math.inf
    max_budget_residual: float = -math.inf
    final_state: Optional[SolverState] = None

    @property
    def ks(self):
        return np.array([r.k for r in self.rows])

    @property
    def objective_values(self):
        return np.array([r.f_x for r in self.rows])

    def best_value(self):
        return float(np.min(self.objective_values))

    def relative_gap(self, fstar):
        return (self.objective_values - fstar) / abs(fstar)


@dataclass
class LyapunovDiagnostics:
    k: np.ndarray
    E: np.ndarray
    Etilde: np.ndarray
    bound_rhs: np.ndarray
    lemma_violations: List[int]
    monotone_violations: List[int]
    lemma_excess: np.ndarray
    monotone_excess: np.ndarray
    tol: float


def next_a(a):
    """Positive root of ``t^2 - t - a^2 = 0``."""
    return 0.5 * (1.0 + math.sqrt(4.0 * a * a + 1.0))


def a_sequence(K):
    """``a_0, ..., a_K`` as an array, starting from ``a_0 = 0``."""
    out = np.empty(K + 1)
    a = 0.0
    out[0] = a
    for k in range(1, K + 1):
        a = next_a(a)
        out[k] = a
    return out


def sapg_mu(k, mu0):
    return mu0 / (k + 1)


def spg_mu(k, mu0, exponent=-0.5):
    return mu0 * (k + 1) ** exponent


def subgrad_stepsize(k, c):
    """``c / sqrt(k)`` for ``k >= 1``."""
    if k < 1:
        raise InvalidIteration("subgradient stepsize is defined for k >= 1")
    return c / math.sqrt(k)


def _L_k(config, mu):
    return config.Lprime + config.L / mu


def initial_state(config, x0):
    x0 = np.array(x0, dtype=float)
    if config.algorithm is Algorithm.SPG:
        mu = spg_mu(0, config.mu0, config.spg_mu_exponent)
    else:
        mu = sapg_mu(0, config.mu0)
    return SolverState(0, x0, x0.copy(), x0.copy(), 0.0, mu, _L_k(config, mu))


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalBreakdown(f"non-finite {name}")


def sapg_step(state, objective, fset, config):
    """One iteration of S-APG; returns state ``k + 1``."""
    k = state.k
    mu = sapg_mu(k, config.mu0)
    Lk = _L_k(config, mu)
    a1 = next_a(state.a)
    t = 1.0 / a1
    y = (1.0 - t) * state.x + t * state.z
    g = objective.grad_smoothed(y, mu)
    _finite("gradient", g)
    with np.errstate(over="ignore", invalid="ignore"):
        w = state.z - (a1 / Lk) * g
    _finite("gradient step", w)
    z = fset.project(w)
    x = (1.0 - t) * state.x + t * z
    _finite("iterate", x, z)
    mu_next = sapg_mu(k + 1, config.mu0)
    return SolverState(k + 1, x, y, z, a1, mu_next, _L_k(config, mu_next), float(np.linalg.norm(z - state.z)))


def spg_step(state, objective, fset, config):
    """Projected gradient step on ``f_mu`` with ``mu_k = mu0 (k+1)^exponent``."""
    k = state.k
    mu = spg_mu(k, config.mu0, config.spg_mu_exponent)
    Lk = _L_k(config, mu)
    g = objective.grad_smoothed(state.x, mu)
    _finite("gradient", g)
    with np.errstate(over="ignore", invalid="ignore"):
        w = state.x - g / Lk
    _finite("gradient step", w)
    x = fset.project(w)
    _finite("iterate", x)
    mu_next = spg_mu(k + 1, config.mu0, config.spg_mu_exponent)
    return SolverState(k + 1, x, state.x, x, 0.0, mu_next, _L_k(config, mu_next), float(np.linalg.norm(x - state.x)))


def subgrad_step(state, objective, fset, config):
    """Projected subgradient step with stepsize ``c / sqrt(k + 1)``."""
    k = state.k
    g = objective.subgradient(state.x)
    _finite("subgradient", g)
    with np.errstate(over="ignore", invalid="ignore"):
        w = state.x - subgrad_stepsize(k + 1, config.subgrad_step_c) * g
    _finite("subgradient step", w)
    x = fset.project(w)
    _finite("iterate", x)
    return SolverState(k + 1, x, state.x, x, 0.0, state.mu, state.L_k, float(np.linalg.norm(x - state.x)))


_STEPS = {Algorithm.SAPG: sapg_step, Algorithm.SPG: spg_step, Algorithm.SUBGRAD: subgrad_step}


def _residuals(fset, state):
    box, budget = -math.inf, -math.inf
    for v in (state.x, state.y, state.z):
        m = fset.contains(v)
        box = max(box, m.box_residual)
        budget = max(budget, m.budget_residual)
    return box, budget


def run(config, objective, fset, x0):
    """Run ``config.max_iters`` iterations from `x0` and return the trace.

    Rows are recorded at every ``trace_every``-th iteration and at the last
    one.  A starting point outside `fset` is projected first.  Feasibility
    of ``x``, ``y`` and ``z`` is checked at every iteration; a residual above
    ``1e-10``, any non-finite value, or a failed factorization or
    eigensolve raises NumericalBreakdown carrying the trace recorded so far.
    """
    x0 = np.asarray(x0, dtype=float)
    if not fset.contains(x0, FEASIBILITY_TOL):
        log.warning("starting point is infeasible; projecting it onto the feasible set")
        x0 = fset.project(x0)
    step = _STEPS[config.algorithm]
    trace = IterateTrace(config.algorithm, config)
    state = initial_state(config, x0)
    t0 = time.perf_counter()

    def record(s):
        box, budget = _residuals(fset, s)
        if config.algorithm is Algorithm.SUBGRAD:
            fx = fmu = objective.eval_nonsmooth(s.x)
        else:
            fx, fmu = objective.values(s.x, s.mu)
        elapsed = time.perf_counter() - t0 if config.record_time else None
        trace.rows.append(TraceRow(s.k, fx, fmu, s.mu, s.L_k, s.a, box, budget, s.step_norm, elapsed))
        _finite("objective value", fx, fmu)

    def check(s):
        box, budget = _residuals(fset, s)
        trace.max_box_residual = max(trace.max_box_residual, box)
        trace.max_budget_residual = max(trace.max_budget_residual, budget)
        if box > FEASIBILITY_TOL or budget > FEASIBILITY_TOL:
            raise NumericalBreakdown(
                f"iterate {s.k} left the feasible set (box residual {box:.3e}, budget residual {budget:.3e})"
            )

    try:
        check(state)
        if config.keep_states:
            trace.states.append(state)
        record(state)
        for k in range(config.max_iters):
            state = step(state, objective, fset, config)
            check(state)
            if config.keep_states:
                trace.states.append(state)
            if state.k % config.trace_every == 0 or state.k == config.max_iters:
                record(state)
    except NumericalBreakdown as exc:
        exc.trace = trace
        trace.final_state = state
        raise
    except (NotPositiveDefinite, NoConvergence) as exc:
        trace.final_state = state
        raise NumericalBreakdown(f"after iterate {state.k}: {exc}", trace) from exc
    trace.final_state = state
    return trace


def lyapunov_series(trace, objective, xstar, fstar=None):
    """Lyapunov values along an S-APG run with retained states.

    ``E_k = (a_k^2 / L_k)(f_{mu_k}(x_k) - f_{mu_k}(x*) + beta mu_k) + |z_k - x*|^2 / 2``
    should satisfy ``E_{k+1} <= E_k + beta a_{k+1} mu_k / L_k``.  ``Etilde_k``
    uses the nonsmooth ``f`` and subtracts the accumulated increments
    ``sum_{l=1}^{k} beta a_{l+1} mu_l / L_l``; it is checked for monotone
    decrease.  Violations are reported at tolerance ``1e-8 * max(1, E_0)``.

    `fstar` defaults to ``f(x*)``.
    """
    states = trace.states
    if not states or states[0].k != 0 or any(s.k != i for i, s in enumerate(states)):
        raise MissingStates("lyapunov_series needs every state from k = 0 (run with keep_states=True)")
    config = trace.config
    beta = objective.constants.beta
    xstar = np.asarray(xstar, dtype=float)
    if fstar is None:
        fstar = objective.eval_nonsmooth(xstar)
    K = len(states) - 1
    dist0 = float(np.linalg.norm(states[0].x - xstar))

    E = np.empty(K + 1)
    Et = np.empty(K + 1)
    bound = np.full(K + 1, np.nan)
    increments = np.empty(K + 1)
    for i, s in enumerate(states):
        mu, Lk, a = s.mu, s.L_k, s.a
        fk_x = objective.eval_smoothed(s.x, mu)
        fk_star = objective.eval_smoothed(xstar, mu)
        half_dist = 0.5 * float(np.sum((s.z - xstar) ** 2))
        E[i] = a * a / Lk * (fk_x - fk_star + beta * mu) + half_dist
        f_x = objective.eval_nonsmooth(s.x)
        Et[i] = a * a / Lk * (f_x - fstar + beta * mu) + half_dist
        # beta a_{k+1} mu_k / L_k, the allowed growth of E from k to k + 1
        increments[i] = beta * next_a(a) * mu / Lk
        if i >= 1:
            bound[i] = theorem_bound(i, config, dist0, beta)
    # Etilde_k subtracts increments l = 1..k
    Et -= np.concatenate(([0.0], np.cumsum(increments[1:])))

    tol = 1e-8 * max(1.0, E[0])
    lemma_excess = E[1:] - (E[:-1] + increments[:-1])
    mono_excess = Et[1:] - Et[:-1]
    lemma_bad = [int(i) for i in np.flatnonzero(lemma_excess > tol)]
    mono_bad = [int(i) for i in np.flatnonzero(mono_excess > tol)]
    return LyapunovDiagnostics(
        np.arange(K + 1), E, Et, bound, lemma_bad, mono_bad, lemma_excess, mono_excess, tol
    )


def theorem_bound(k, config, x0_dist, beta):
    """Upper bound on ``f(x_k) - f(x*)`` for S-APG.

    ``(2 L d^2 + 6 beta mu0^2 log k) / (mu0 k)
    + 2 (Lprime + L / mu0)(d^2 + (3 beta mu0^2 / L) log k) / k^2``
    with ``d = |x_0 - x*|``.  With ``L = 0`` this reduces to the
    accelerated-gradient bound ``2 Lprime d^2 / k^2``.
    """
    if k < 1:
        raise InvalidIteration(f"theorem bound requires k >= 1, got {k}")
    L, Lp, mu0 = config.L, config.Lprime, config.mu0
    d2 = x0_dist * x0_dist
    if L == 0:
        return 2.0 * Lp * d2 / (k * k)
    logk = math.log(k)
    first = (2.0 * L * d2 + 6.0 * beta * mu0 * mu0 * logk) / (mu0 * k)
    second = 2.0 * (Lp + L / mu0) * (d2 + 3.0 * beta * mu0 * mu0 / L * logk) / (k * k)
    return first + second
