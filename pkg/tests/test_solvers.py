import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sapg.checks import box_quadratic_instance, one_dimensional_instance
from sapg.errors import InvalidIteration, MissingStates, NumericalBreakdown
from sapg.feasible_set import Box, EuclideanSpace
from sapg.smoothing import FiniteMaxObjective, QuadraticObjective
from sapg.solvers import (
    Algorithm,
    SolverConfig,
    a_sequence,
    initial_state,
    lyapunov_series,
    next_a,
    run,
    sapg_mu,
    sapg_step,
    spg_mu,
    subgrad_stepsize,
    theorem_bound,
)


def test_a_sequence_first_terms():
    a = a_sequence(3)
    assert a[0] == 0.0 and a[1] == 1.0
    assert a[2] == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-15)
    assert a[3] == pytest.approx(2.193527085331054, abs=1e-15)


@settings(max_examples=200)
@given(st.floats(0.0, 1e8))
def test_next_a_solves_recurrence(a):
    b = next_a(a)
    assert b > a
    assert abs((b - a) * (b + a) - b) <= 1e-12 * b * b


def test_schedules():
    assert sapg_mu(0, 1.0) == 1.0 and sapg_mu(3, 1.0) == 0.25
    assert spg_mu(3, 1.0) == 0.5 and spg_mu(8, 2.0, -1.0) == pytest.approx(2 / 9)
    assert subgrad_stepsize(4, 1e-6) == 5e-7
    with pytest.raises(InvalidIteration):
        subgrad_stepsize(0, 1.0)


def test_theorem_bound_values():
    cfg = SolverConfig(mu0=1.0, L=1.0, Lprime=0.0)
    # k = 1: log k = 0, so 2 L d^2 / mu0 + 2 (L / mu0) d^2 = 4
    assert theorem_bound(1, cfg, 1.0, math.log(2)) == pytest.approx(4.0)
    cfg = SolverConfig(mu0=0.5, L=2.0, Lprime=1.0)
    # (0.36 + 1.5 ln2 ln10) / 5 + 10 (0.09 + 0.375 ln2 ln10) / 100
    assert theorem_bound(10, cfg, 0.3, math.log(2)) == pytest.approx(0.6196602482577614, rel=1e-14)
    smooth = SolverConfig(L=0.0, Lprime=3.0)
    assert theorem_bound(5, smooth, 2.0, 0.0) == pytest.approx(2 * 3.0 * 4.0 / 25)
    with pytest.raises(InvalidIteration):
        theorem_bound(0, cfg, 1.0, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mu0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(L=0.0, Lprime=0.0)
    with pytest.raises(ValueError):
        SolverConfig(trace_every=0)
    with pytest.raises(ValueError):
        SolverConfig(algorithm="newton")
    assert SolverConfig(algorithm="spg").algorithm is Algorithm.SPG


def test_sapg_steps_on_scalar_quadratic():
    # f = x^2 / 2 with Lprime = 2: z1 = 1 - 1/2, x1 = z1; then
    # z2 = 1/2 - (phi / 2)(1/2) and x2 = (1 - 1/phi)/2 + z2 / phi = 1/4 exactly
    obj = QuadraticObjective([[1.0]])
    cfg = SolverConfig(L=0.0, Lprime=2.0)
    s = initial_state(cfg, [1.0])
    s = sapg_step(s, obj, EuclideanSpace(1), cfg)
    assert s.x[0] == 0.5 and s.z[0] == 0.5 and s.a == 1.0
    s = sapg_step(s, obj, EuclideanSpace(1), cfg)
    assert s.x[0] == pytest.approx(0.25, abs=1e-15)
    assert s.y[0] == pytest.approx(0.5, abs=1e-15)


def test_subgradient_first_step_uses_c():
    obj = FiniteMaxObjective([[1.0], [-1.0]])
    cfg = SolverConfig(algorithm=Algorithm.SUBGRAD, subgrad_step_c=0.1, max_iters=2)
    trace = run(cfg, obj, Box([-5.0], [5.0]), [1.0])
    # x1 = 1 - 0.1, x2 = 0.9 - 0.1 / sqrt(2)
    np.testing.assert_allclose(trace.objective_values, [1.0, 0.9, 0.9 - 0.1 / math.sqrt(2)], atol=1e-15)


def test_spg_step_is_projected_gradient():
    obj = QuadraticObjective([[1.0]], [-3.0])
    cfg = SolverConfig(algorithm=Algorithm.SPG, L=0.0, Lprime=1.0, max_iters=1)
    trace = run(cfg, obj, Box([0.0], [2.0]), [0.0])
    # x1 = P(0 - (0 - 3)) = 2
    assert trace.final_state.x[0] == 2.0


def test_trace_stride_and_final_row():
    obj, fset, x0, _, _ = one_dimensional_instance()
    trace = run(SolverConfig(max_iters=23, trace_every=5, L=1.0), obj, fset, x0)
    assert trace.ks.tolist() == [0, 5, 10, 15, 20, 23]
    assert trace.rows[0].time_s is None


def test_runs_are_deterministic(default_problem):
    cfg = SolverConfig(max_iters=30)
    x0 = default_problem.initial_design()
    t1 = run(cfg, default_problem.objective, default_problem.feasible, x0)
    t2 = run(cfg, default_problem.objective, default_problem.feasible, x0)
    assert t1.rows == t2.rows


@pytest.mark.parametrize("algo", list(Algorithm))
def test_truss_iterates_stay_feasible(default_problem, algo):
    cfg = SolverConfig(algorithm=algo, max_iters=100, L=1e6 if algo is Algorithm.SPG else 1e5)
    trace = run(cfg, default_problem.objective, default_problem.feasible, default_problem.initial_design())
    assert trace.max_box_residual <= 1e-10 and trace.max_budget_residual <= 1e-10
    assert trace.rows[-1].f_x < trace.rows[0].f_x


def test_infeasible_start_is_projected(caplog):
    obj, fset, _, _, _ = one_dimensional_instance()
    with caplog.at_level("WARNING"):
        trace = run(SolverConfig(max_iters=1, L=1.0), obj, fset, [10.0])
    assert "infeasible" in caplog.text
    assert trace.rows[0].f_x == 2.0


def test_breakdown_carries_partial_trace():
    obj, fset, x0, _, _ = one_dimensional_instance()
    # L_k = 1e-300 * (k + 1) overflows the first gradient step
    cfg = SolverConfig(L=0.0, Lprime=1e-300, max_iters=10)
    with pytest.raises(NumericalBreakdown) as info:
        run(cfg, FiniteMaxObjective([[1e10], [-1e10]]), fset, x0)
    assert info.value.trace is not None and info.value.trace.ks.tolist() == [0]


def test_lyapunov_requires_states():
    obj, fset, x0, xstar, _ = one_dimensional_instance()
    trace = run(SolverConfig(max_iters=5, L=1.0), obj, fset, x0)
    with pytest.raises(MissingStates):
        lyapunov_series(trace, obj, xstar)


def test_lyapunov_on_one_dimensional_instance():
    obj, fset, x0, xstar, fstar = one_dimensional_instance()
    trace = run(SolverConfig(max_iters=500, L=1.0, keep_states=True), obj, fset, x0)
    diag = lyapunov_series(trace, obj, xstar, fstar)
    assert diag.lemma_violations == [] and diag.monotone_violations == []
    assert diag.E[0] == pytest.approx(0.5 * 1.7**2)
    assert np.all(trace.objective_values[1:] - fstar <= diag.bound_rhs[1:])


def test_box_quadratic_minimizer_is_exact():
    obj, fset, x0, xstar, fstar = box_quadratic_instance()
    g = obj.grad_smoothed(xstar, 1.0)
    # projected gradient fixed point
    np.testing.assert_allclose(fset.project(xstar - g), xstar, atol=1e-15)
    trace = run(SolverConfig(max_iters=3000, L=0.0, Lprime=obj.constants.Lprime), obj, fset, x0)
    assert trace.rows[-1].f_x - fstar <= 1e-6
    assert trace.rows[-1].f_x >= fstar - 1e-12
