import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sapg.checks import active_set_projection
from sapg.errors import DimensionMismatch, EmptySet, InfeasibleVolumeBudget
from sapg.feasible_set import Box, BoxBudgetSet, EuclideanSpace, contains, project


def test_symmetric_projection_hand_computed():
    S = BoxBudgetSet([1.0, 1.0], 1.0, 0.1)
    p = S.project_with_multiplier([1.0, 1.0])
    np.testing.assert_allclose(p.x, [0.5, 0.5], atol=1e-15)
    assert p.multiplier == pytest.approx(0.5, abs=1e-15)


def test_projection_with_one_component_at_lower_bound():
    # x = max(0.1, y - theta): 2 - theta + 0.1 = 1  ->  theta = 1.1
    S = BoxBudgetSet([1.0, 1.0], 1.0, 0.1)
    p = S.project_with_multiplier([2.0, 0.0])
    np.testing.assert_allclose(p.x, [0.9, 0.1], atol=1e-15)
    assert p.multiplier == pytest.approx(1.1, abs=1e-14)


def test_projection_weighted_lengths():
    # l = (1, 2), V0 = 2, y = (2, 2): x = y - theta l, 2 - theta + 4 - 4 theta = 2 -> theta = 0.8
    S = BoxBudgetSet([1.0, 2.0], 2.0, 0.01)
    p = S.project_with_multiplier([2.0, 2.0])
    np.testing.assert_allclose(p.x, [1.2, 0.4], atol=1e-15)
    assert p.multiplier == pytest.approx(0.8)


def test_inside_points_are_fixed_and_lower_bound_clips():
    S = BoxBudgetSet([1.0, 2.0, 3.0], 10.0, 0.5)
    y = np.array([1.0, 0.7, 0.6])
    np.testing.assert_array_equal(S.project(y), y)
    np.testing.assert_array_equal(S.project([-5.0, 1.0, 0.0]), [0.5, 1.0, 0.5])
    assert S.project_with_multiplier(y).multiplier == 0.0


def test_all_components_driven_to_lower_bound():
    # budget exactly x_min * sum(l): the only feasible point
    S = BoxBudgetSet([1.0, 1.0, 2.0], 0.4, 0.1)
    np.testing.assert_allclose(S.project([5.0, -3.0, 7.0]), [0.1, 0.1, 0.1], atol=1e-15)


def test_contains_residuals():
    S = BoxBudgetSet([1.0, 1.0], 1.0, 0.1)
    m = S.contains([0.05, 0.5])
    assert not m and m.box_residual == pytest.approx(0.05) and m.budget_residual == pytest.approx(-0.45)
    assert S.contains([0.5, 0.5]) and contains(S, [0.5, 0.5 + 1e-12], tol=1e-10)
    assert not S.contains([0.5, 0.6]).inside


def test_interior_point_spends_budget():
    S = BoxBudgetSet([1.0, 2.0, 5.0], 4.0, 0.01)
    x = S.interior_point()
    assert S.lengths @ x == pytest.approx(4.0) and np.ptp(x) == 0.0


def test_invalid_sets():
    with pytest.raises(InfeasibleVolumeBudget):
        BoxBudgetSet([1.0, 1.0], 0.1, 0.1)
    with pytest.raises(EmptySet):
        BoxBudgetSet([1.0, 1.0], 0.1, 0.1)
    with pytest.raises(ValueError):
        BoxBudgetSet([1.0, 0.0], 1.0, 0.1)
    with pytest.raises(DimensionMismatch):
        BoxBudgetSet([], 1.0, 0.1)
    with pytest.raises(DimensionMismatch):
        BoxBudgetSet([1.0, 1.0], 1.0, 0.1).project([1.0, 2.0, 3.0])
    with pytest.raises(EmptySet):
        Box([0.0, 1.0], [1.0, 0.0])


def test_box_and_space():
    B = Box([0.0, -1.0], [1.0, 1.0])
    np.testing.assert_array_equal(project(B, [2.0, -3.0]), [1.0, -1.0])
    assert B.contains([0.5, 0.0]) and not B.contains([1.5, 0.0])
    assert B.contains([1.5, 0.0]).box_residual == pytest.approx(0.5)
    E = EuclideanSpace(3)
    y = np.array([1e300, -2.0, 0.0])
    np.testing.assert_array_equal(E.project(y), y)
    assert E.contains(y)


def test_active_set_oracle_hand_example():
    np.testing.assert_allclose(active_set_projection([1.0, 1.0], 1.0, 0.1, [2.0, 0.0]), [0.9, 0.1], atol=1e-15)


@st.composite
def set_and_point(draw):
    m = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    l = rng.uniform(0.1, 5.0, m)
    xmin = rng.uniform(1e-4, 1.0)
    V0 = xmin * l.sum() * (1.0 + rng.exponential(2.0))
    scale = draw(st.sampled_from([0.1, 1.0, 10.0, 1e3]))
    y = rng.normal(size=m) * scale * V0 / l.sum()
    return BoxBudgetSet(l, V0, xmin), y, rng.normal(size=m) * scale


@settings(max_examples=300, deadline=None)
@given(set_and_point())
def test_projection_matches_oracle(case):
    S, y, _ = case
    p = S.project(y)
    q = active_set_projection(S.lengths, S.volume_budget, S.lower_bound, y)
    assert np.max(np.abs(p - q)) <= 1e-10 * max(1.0, np.max(np.abs(y)))


@settings(max_examples=300, deadline=None)
@given(set_and_point())
def test_projection_geometry(case):
    S, y, d = case
    p = S.project(y)
    assert S.contains(p, tol=1e-12 * max(1.0, np.max(np.abs(y))))
    np.testing.assert_allclose(S.project(p), p, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(p))))
    p2 = S.project(y + d)
    assert np.linalg.norm(p - p2) <= np.linalg.norm(d) * (1 + 1e-12) + 1e-12
    w = S.interior_point()
    assert (y - p) @ (w - p) <= 1e-10 * max(1.0, np.linalg.norm(y)) ** 2


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 80), st.floats(1e3, 1e12), st.integers(0, 2**32 - 1))
def test_far_points_project_feasibly(m, scale, seed):
    # Steps of a solver can land ~1e10 away from a set of size ~1e-3.
    rng = np.random.default_rng(seed)
    l = rng.uniform(0.5, 2.0, m)
    S = BoxBudgetSet(l, 0.1, 1e-8)
    y = rng.normal(size=m) * scale
    m_ = S.contains(S.project(y))
    assert m_.box_residual <= 0.0 and m_.budget_residual <= 1e-15
