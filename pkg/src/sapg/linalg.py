"""Dense symmetric linear algebra: Cholesky, Jacobi eigensolver, log-sum-exp.

Everything here is a pure function of its arguments.  Matrices are plain
``numpy.ndarray`` objects; :func:`as_symmetric` is the single entry point
that validates and mirrors an input so the rest of the code can assume exact
symmetry.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, EmptyInput, NoConvergence, NotPositiveDefinite

__all__ = [
    "CholeskyFactor",
    "EigenDecomposition",
    "as_symmetric",
    "cholesky",
    "chol_solve",
    "sym_eig",
    "jacobi_eigh",
    "log_sum_exp",
    "softmax_weights",
]

PIVOT_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100
JACOBI_RTOL = 1e-12


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def order(self):
        return self.lower.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending; ``vectors[:, i]`` pairs with ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def order(self):
        return self.values.shape[0]


def as_symmetric(A, rtol=1e-10):
    """Return a float copy of `A` with the lower triangle mirrored from the upper.

    Raises DimensionMismatch for non-square input and ValueError when `A` is
    visibly asymmetric (beyond ``rtol * max(1, |A|_F)``).
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {A.shape}")
    scale = max(1.0, np.linalg.norm(A))
    if np.max(np.abs(A - A.T)) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    iu = np.triu_indices(A.shape[0], 1)
    A.T[iu] = A[iu]
    return A


def cholesky(K):
    """Lower-triangular factor of a symmetric positive definite matrix.

    A pivot ``L_ii**2`` at or below ``1e-14 * max(diag(K))`` is rejected with
    NotPositiveDefinite.
    """
    K = as_symmetric(K)
    dmax = float(np.max(np.diag(K)))
    if not dmax > 0.0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(L) ** 2
    bad = np.flatnonzero(~(pivots > PIVOT_RTOL * dmax))
    if bad.size:
        raise NotPositiveDefinite(
            f"pivot {bad[0]} = {pivots[bad[0]]:.3e} below tolerance {PIVOT_RTOL * dmax:.3e}"
        )
    return CholeskyFactor(L)


def chol_solve(F, B):
    """Solve ``K X = B`` given the Cholesky factor of ``K``.

    `B` may be a vector or a matrix; the result has the same shape.
    """
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.order:
        raise DimensionMismatch(f"right-hand side has {B.shape[0]} rows, factor has order {F.order}")
    W = solve_triangular(F.lower, B, lower=True, check_finite=False)
    return solve_triangular(F.lower, W, lower=True, trans="T", check_finite=False)


def _sorted_decomposition(values, vectors):
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], vectors[:, order])


def jacobi_eigh(A, max_sweeps=JACOBI_MAX_SWEEPS, rtol=JACOBI_RTOL):
    """Cyclic Jacobi eigenvalue iteration for a symmetric matrix.

    Sweeps over all (p, q) pairs, annihilating each off-diagonal entry with a
    plane rotation, until the off-diagonal Frobenius norm falls below
    ``rtol * |A|_F``.

    Returns
    -------
    values, vectors : ndarray
        Unsorted eigenvalues (the final diagonal) and the accumulated
        orthogonal transform whose columns are the eigenvectors.
    """
    a = as_symmetric(A)
    n = a.shape[0]
    V = np.eye(n)
    target = rtol * np.linalg.norm(a)
    for _ in range(max_sweeps + 1):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= target:
            return np.diag(a).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                with np.errstate(over="ignore"):
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # theta = inf (denormal apq) gives t = 0, an identity rotation
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
                ap = a[p, :].copy()
                a[p, :] = c * ap - s * a[q, :]
                a[q, :] = s * ap + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    raise NoConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def sym_eig(A, method="jacobi"):
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Ties are ordered by ascending position on the converged diagonal, so the
    output is deterministic.  ``method="lapack"`` swaps in ``numpy.linalg.eigh``
    for larger orders; the ordering rule is the same.
    """
    if method == "jacobi":
        w, V = jacobi_eigh(A)
    elif method == "lapack":
        w, V = np.linalg.eigh(as_symmetric(A))
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return _sorted_decomposition(w, V)


def _as_values(values):
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("log-sum-exp of an empty vector")
    return v


def log_sum_exp(values, mu):
    """``mu * log(sum(exp(values / mu)))`` evaluated with a max shift."""
    v = _as_values(values)
    if not mu > 0:
        raise ValueError("mu must be positive")
    vmax = v.max()
    return vmax + mu * np.log(np.sum(np.exp((v - vmax) / mu)))


def softmax_weights(values, mu):
    """Gradient of :func:`log_sum_exp` with respect to `values`."""
    v = _as_values(values)
    if not mu > 0:
        raise ValueError("mu must be positive")
    e = np.exp((v - v.max()) / mu)
    return e / e.sum()
