import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sapg.checks import finite_difference_gradient
from sapg.errors import DimensionMismatch, EmptyInput
from sapg.smoothing import (
    AffineMatrixMap,
    FiniteMaxObjective,
    QuadraticObjective,
    SmoothingConstants,
    SpectralLseObjective,
    finite_max_lse,
    lipschitz_witness,
    spectral_f_mu,
    subgradient_max_eig,
)

MUS = (2.0, 1.0, 0.5, 0.1, 0.01, 0.0)
vectors = arrays(float, st.integers(1, 6), elements=st.floats(-5, 5, allow_nan=False))


def random_affine_map(rng, order, dim):
    mats = []
    for _ in range(dim):
        G = rng.normal(size=(order, order))
        mats.append(G + G.T)
    G = rng.normal(size=(order, order))
    return AffineMatrixMap(mats, G + G.T)


def test_diagonal_map_known_value():
    obj = SpectralLseObjective(AffineMatrixMap.diagonal(2))
    # mu log(e + 1) - mu log 2 at x = (1, 0), mu = 1
    assert obj.eval_smoothed([1.0, 0.0], 1.0) == pytest.approx(0.6201145069582775, abs=1e-14)
    assert obj.eval_smoothed([1.0, 0.0], 0.0) == 1.0
    assert obj.eval_smoothed([0.0, 0.0], 0.3) == pytest.approx(0.0, abs=1e-15)
    assert obj.constants.beta == pytest.approx(math.log(2.0))


@settings(max_examples=60, deadline=None)
@given(vectors, st.floats(0.01, 3.0))
def test_diagonal_spectral_equals_finite_max(x, mu):
    spec = SpectralLseObjective(AffineMatrixMap.diagonal(x.size))
    fm = FiniteMaxObjective(np.eye(x.size))
    f1, g1 = spec.value_and_grad(x, mu)
    f2, g2 = fm.value_and_grad(x, mu)
    assert f1 == pytest.approx(f2, abs=1e-12)
    np.testing.assert_allclose(g1, g2, atol=1e-12)
    assert finite_max_lse(x, mu) == pytest.approx(f2, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 4))
def test_sandwich_on_affine_maps(seed, order, dim):
    rng = np.random.default_rng(seed)
    obj = SpectralLseObjective(random_affine_map(rng, order, dim))
    x = rng.normal(size=dim)
    beta = obj.constants.beta
    vals = [obj.eval_smoothed(x, mu) for mu in MUS]
    for i in range(len(MUS)):
        for j in range(i + 1, len(MUS)):
            diff = vals[j] - vals[i]
            assert -1e-12 <= diff <= beta * (MUS[i] - MUS[j]) + 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 0.1, 0.01]))
def test_gradient_matches_finite_differences(seed, mu):
    rng = np.random.default_rng(seed)
    obj = SpectralLseObjective(random_affine_map(rng, 3, 4))
    x = rng.normal(size=4)
    fd = finite_difference_gradient(lambda v: obj.eval_smoothed(v, mu), x)
    g = obj.grad_smoothed(x, mu)
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


def test_spectral_value_convex_along_segments():
    rng = np.random.default_rng(3)
    obj = SpectralLseObjective(random_affine_map(rng, 4, 3))
    for _ in range(50):
        x, y = rng.normal(size=3), rng.normal(size=3)
        t = rng.uniform()
        for mu in (0.0, 0.1, 1.0):
            lhs = obj.eval_smoothed(t * x + (1 - t) * y, mu)
            rhs = t * obj.eval_smoothed(x, mu) + (1 - t) * obj.eval_smoothed(y, mu)
            assert lhs <= rhs + 1e-10


def test_subgradient_at_simple_top_eigenvalue():
    rng = np.random.default_rng(5)
    M = random_affine_map(rng, 3, 4)
    obj = SpectralLseObjective(M)
    x = rng.normal(size=4)
    g = obj.subgradient(x)
    fd = finite_difference_gradient(obj.eval_nonsmooth, x)
    np.testing.assert_allclose(g, fd, atol=1e-6)
    np.testing.assert_allclose(subgradient_max_eig(M.matrix(x), M, x), g)


def test_subgradient_inequality_at_repeated_top_eigenvalue():
    obj = SpectralLseObjective(AffineMatrixMap.diagonal(3))
    x = np.array([1.0, 1.0, 0.0])
    g = obj.subgradient(x)
    rng = np.random.default_rng(0)
    for _ in range(100):
        y = rng.normal(size=3)
        assert obj.eval_nonsmooth(y) >= obj.eval_nonsmooth(x) + g @ (y - x) - 1e-12


def test_quadratic_objective():
    obj = QuadraticObjective([[2.0, 0.0], [0.0, 1.0]], [1.0, -1.0])
    assert obj.constants == SmoothingConstants(0.0, 2.0, 0.0)
    f, g = obj.value_and_grad([1.0, 1.0], 0.5)
    assert f == pytest.approx(1.5) and g.tolist() == [3.0, 0.0]
    assert obj.eval_smoothed([1.0, 1.0], 0.0) == obj.eval_smoothed([1.0, 1.0], 7.0)


def test_finite_max_constants_and_subgradient():
    obj = FiniteMaxObjective([[3.0, 4.0], [1.0, 0.0]], [0.0, 10.0])
    assert obj.constants.L == 25.0 and obj.constants.beta == pytest.approx(math.log(2))
    assert obj.eval_nonsmooth([0.0, 0.0]) == 10.0
    assert obj.subgradient([0.0, 0.0]).tolist() == [1.0, 0.0]


def test_errors():
    obj = SpectralLseObjective(AffineMatrixMap.diagonal(2))
    with pytest.raises(DimensionMismatch):
        obj.eval_smoothed([1.0, 2.0, 3.0], 1.0)
    with pytest.raises(EmptyInput):
        AffineMatrixMap([])
    with pytest.raises(ValueError):
        SmoothingConstants(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        obj.eval_smoothed([1.0, 2.0], -0.5)
    with pytest.raises(ValueError):
        spectral_f_mu(np.eye(2), 0.0)


def test_lipschitz_witness_within_bound_for_finite_max(caplog):
    obj = FiniteMaxObjective([[1.0], [-1.0]])
    pts = [np.array([t]) for t in np.linspace(-1, 1, 41)]
    worst, bound = lipschitz_witness(obj, pts, 0.1)
    assert 0 < worst <= bound == pytest.approx(10.0)
    assert not caplog.records


def test_lipschitz_witness_logs_excess(caplog):
    obj = FiniteMaxObjective([[1.0], [-1.0]])
    object.__setattr__(obj, "constants", SmoothingConstants(1e-3, 0.0, math.log(2)))
    with caplog.at_level("WARNING"):
        lipschitz_witness(obj, [np.array([0.0]), np.array([0.01])], 0.1)
    assert "exceeds" in caplog.text
