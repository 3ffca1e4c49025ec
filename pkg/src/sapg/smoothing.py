"""Smoothed objectives ``f_mu`` with ``f_mu <= f <= f_mu + beta * mu``.

The central object is :class:`SpectralLseObjective`, the log-sum-exp
smoothing of the largest eigenvalue of a matrix-valued map ``A(x)``:

    f_mu(x) = mu * log(sum_i exp(lambda_i(A(x)) / mu)) - mu * log(n)

Its gradient has components ``sum_i w_i u_i^T (dA/dx_j) u_i`` where
``(lambda_i, u_i)`` are the eigenpairs of ``A(x)`` and ``w`` are the softmax
weights of the eigenvalues.  The matrix map supplies the contraction with
``dA/dx_j`` so that it can use closed-form derivatives.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .linalg import as_symmetric, log_sum_exp, softmax_weights, sym_eig

log = logging.getLogger(__name__)

__all__ = [
    "SmoothingConstants",
    "SmoothedObjective",
    "MatrixMap",
    "AffineMatrixMap",
    "SpectralLseObjective",
    "FiniteMaxObjective",
    "QuadraticObjective",
    "spectral_f_mu",
    "spectral_grad_f_mu",
    "finite_max_lse",
    "finite_max_lse_grad",
    "subgradient_max_eig",
    "lipschitz_witness",
]


@dataclass(frozen=True)
class SmoothingConstants:
    """``grad f_mu`` is ``(Lprime + L / mu)``-Lipschitz; ``beta`` bounds the smoothing gap."""

    L: float
    Lprime: float
    beta: float

    def __post_init__(self):
        if self.L < 0 or self.Lprime < 0 or self.beta < 0:
            raise ValueError("smoothing constants must be nonnegative")


class SmoothedObjective(ABC):
    """A convex function together with a family of smooth approximations.

    Subclasses implement :meth:`value_and_grad` and :meth:`eval_nonsmooth`.
    ``mu = 0`` always means the nonsmooth function itself.
    """

    constants: SmoothingConstants
    dimension: int

    @abstractmethod
    def value_and_grad(self, x, mu):
        """Return ``(f_mu(x), grad f_mu(x))`` for ``mu > 0``."""

    @abstractmethod
    def eval_nonsmooth(self, x):
        """Return ``f(x)``."""

    def eval_smoothed(self, x, mu):
        if mu == 0:
            return self.eval_nonsmooth(x)
        return self.value_and_grad(x, mu)[0]

    def grad_smoothed(self, x, mu):
        return self.value_and_grad(x, mu)[1]

    def values(self, x, mu):
        """``(f(x), f_mu(x))``; subclasses may share work between the two."""
        return self.eval_nonsmooth(x), self.eval_smoothed(x, mu)

    def subgradient(self, x):
        raise NotImplementedError(f"{type(self).__name__} does not provide subgradients")

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(f"expected a design vector of length {self.dimension}, got {x.shape}")
        return x


class MatrixMap(ABC):
    """A smooth map ``x -> A(x)`` into symmetric ``order x order`` matrices."""

    dimension: int
    order: int

    @abstractmethod
    def linearize(self, x):
        """Return ``(A, pullback)`` at `x`.

        ``pullback(U, w)`` returns the vector whose j-th entry is
        ``sum_i w[i] * U[:, i] @ dA/dx_j @ U[:, i]``.
        """

    @abstractmethod
    def partial(self, x, j):
        """``dA/dx_j`` at `x` as a dense matrix."""

    def matrix(self, x):
        return self.linearize(x)[0]


class AffineMatrixMap(MatrixMap):
    """``A(x) = A0 + sum_j x_j * A_j`` for fixed symmetric ``A_j``."""

    def __init__(self, coefficients, offset=None):
        mats = [as_symmetric(Aj) for Aj in coefficients]
        if not mats:
            raise EmptyInput("need at least one coefficient matrix")
        self.order = mats[0].shape[0]
        if any(Aj.shape != (self.order, self.order) for Aj in mats):
            raise DimensionMismatch("coefficient matrices differ in shape")
        self.coefficients = np.stack(mats)
        self.offset = np.zeros((self.order, self.order)) if offset is None else as_symmetric(offset)
        self.dimension = len(mats)

    @classmethod
    def diagonal(cls, m):
        """The map ``x -> diag(x)``."""
        return cls([np.diag(np.eye(m)[j]) for j in range(m)])

    def linearize(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(f"expected length {self.dimension}, got {x.shape}")
        A = self.offset + np.tensordot(x, self.coefficients, axes=1)

        def pullback(U, w):
            # entry j: sum_i w_i u_i^T A_j u_i
            return np.einsum("jab,ai,bi,i->j", self.coefficients, U, U, w)

        return A, pullback

    def partial(self, x, j):
        return self.coefficients[j].copy()


def spectral_f_mu(A, mu, method="jacobi"):
    """Log-sum-exp smoothing of ``lambda_max(A)``, shifted so ``f_mu <= lambda_max``."""
    values = sym_eig(A, method).values
    return log_sum_exp(values, mu) - mu * np.log(values.size)


def spectral_grad_f_mu(x, mu, matrix_map, method="jacobi"):
    A, pullback = matrix_map.linearize(x)
    ed = sym_eig(A, method)
    return pullback(ed.vectors, softmax_weights(ed.values, mu))


def finite_max_lse(values, mu):
    v = np.asarray(values, dtype=float).ravel()
    return log_sum_exp(v, mu) - mu * np.log(v.size)


def finite_max_lse_grad(values, mu):
    return softmax_weights(values, mu)


def subgradient_max_eig(A, matrix_map, x, method="jacobi"):
    """Subgradient of ``lambda_max(A(.))`` at `x` from the leading eigenvector of ``A = A(x)``.

    When the top eigenvalue is repeated, the eigenvector listed first by
    :func:`sym_eig` is used; any unit vector of the top eigenspace gives a
    valid subgradient.
    """
    ed = sym_eig(A, method)
    _, pullback = matrix_map.linearize(x)
    w = np.zeros(ed.order)
    w[0] = 1.0
    return pullback(ed.vectors, w)


class SpectralLseObjective(SmoothedObjective):
    """``f(x) = lambda_max(A(x))`` smoothed by spectral log-sum-exp.

    Parameters
    ----------
    matrix_map : MatrixMap
        Provider of ``A(x)`` and its derivative contractions.
    L, Lprime : float
        Lipschitz coefficients of ``grad f_mu``.  These are rarely known in
        closed form; callers pass estimates.
    eig_method : {"jacobi", "lapack"}
        Eigensolver used for every evaluation.
    """

    def __init__(self, matrix_map, L=1.0, Lprime=0.0, eig_method="jacobi"):
        self.matrix_map = matrix_map
        self.dimension = matrix_map.dimension
        self.order = matrix_map.order
        self.eig_method = eig_method
        self.constants = SmoothingConstants(float(L), float(Lprime), float(np.log(self.order)))

    def value_and_grad(self, x, mu):
        x = self._check(x)
        A, pullback = self.matrix_map.linearize(x)
        ed = sym_eig(A, self.eig_method)
        value = log_sum_exp(ed.values, mu) - mu * np.log(ed.order)
        return value, pullback(ed.vectors, softmax_weights(ed.values, mu))

    def eval_nonsmooth(self, x):
        A = self.matrix_map.matrix(self._check(x))
        return float(sym_eig(A, self.eig_method).values[0])

    def values(self, x, mu):
        lam = self.eigenvalues(x)
        return float(lam[0]), log_sum_exp(lam, mu) - mu * np.log(lam.size)

    def eigenvalues(self, x):
        return sym_eig(self.matrix_map.matrix(self._check(x)), self.eig_method).values

    def subgradient(self, x):
        x = self._check(x)
        A = self.matrix_map.matrix(x)
        return subgradient_max_eig(A, self.matrix_map, x, self.eig_method)


class FiniteMaxObjective(SmoothedObjective):
    """``f(x) = max_i (a_i @ x + b_i)`` with log-sum-exp smoothing.

    ``beta = log(n)``; ``L = max_i |a_i|^2`` bounds the curvature of the
    smoothed function times ``mu``.
    """

    def __init__(self, slopes, intercepts=None):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        n, m = self.slopes.shape
        self.intercepts = np.zeros(n) if intercepts is None else np.asarray(intercepts, dtype=float)
        self.dimension = m
        L = float(np.max(np.sum(self.slopes**2, axis=1)))
        self.constants = SmoothingConstants(L, 0.0, float(np.log(n)))

    def _affine(self, x):
        return self.slopes @ self._check(x) + self.intercepts

    def value_and_grad(self, x, mu):
        v = self._affine(x)
        return finite_max_lse(v, mu), self.slopes.T @ finite_max_lse_grad(v, mu)

    def eval_nonsmooth(self, x):
        return float(np.max(self._affine(x)))

    def subgradient(self, x):
        return self.slopes[int(np.argmax(self._affine(x)))].copy()


class QuadraticObjective(SmoothedObjective):
    """Smooth ``f(x) = 0.5 x^T H x + c^T x``; every ``f_mu`` equals ``f``."""

    def __init__(self, H, c=None):
        self.H = as_symmetric(H)
        self.dimension = self.H.shape[0]
        self.c = np.zeros(self.dimension) if c is None else np.asarray(c, dtype=float)
        lmax = float(np.max(np.linalg.eigvalsh(self.H)))
        self.constants = SmoothingConstants(0.0, max(lmax, 0.0), 0.0)

    def value_and_grad(self, x, mu):
        x = self._check(x)
        Hx = self.H @ x
        return float(0.5 * x @ Hx + self.c @ x), Hx + self.c

    def eval_nonsmooth(self, x):
        return self.value_and_grad(x, 0.0)[0]

    def subgradient(self, x):
        return self.value_and_grad(x, 0.0)[1]


def lipschitz_witness(objective, points, mu):
    """Largest observed ``|grad f_mu(x) - grad f_mu(y)| / |x - y|`` over consecutive pairs.

    Compared against ``Lprime + L / mu``; an excess is logged, not raised,
    because configured constants are usually estimates.
    """
    grads = [objective.grad_smoothed(p, mu) for p in points]
    worst = 0.0
    for (p, gp), (q, gq) in zip(zip(points, grads), zip(points[1:], grads[1:])):
        dist = np.linalg.norm(p - q)
        if dist > 0:
            worst = max(worst, np.linalg.norm(gp - gq) / dist)
    c = objective.constants
    bound = c.Lprime + c.L / mu
    if worst > bound:
        log.warning("observed gradient Lipschitz ratio %.3e exceeds configured %.3e at mu=%g", worst, bound, mu)
    return worst, bound
