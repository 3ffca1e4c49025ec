"""Convex feasible sets with exact Euclidean projections.

The main set is :class:`BoxBudgetSet`, ``{x : l @ x <= V0, x >= x_min}``,
the design space of a volume-constrained truss.  :class:`Box` and
:class:`EuclideanSpace` exist for synthetic problems and tests.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, EmptySet, InfeasibleVolumeBudget

__all__ = ["Membership", "Projection", "BoxBudgetSet", "Box", "EuclideanSpace", "project", "contains"]


class Membership(NamedTuple):
    """Result of a membership test.

    Residuals are worst-case constraint values; positive means violated.
    """

    inside: bool
    box_residual: float
    budget_residual: float

    def __bool__(self):
        return self.inside


class Projection(NamedTuple):
    x: np.ndarray
    multiplier: float


def _check_dim(x, m):
    x = np.asarray(x, dtype=float)
    if x.shape != (m,):
        raise DimensionMismatch(f"expected a vector of length {m}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class BoxBudgetSet:
    """Lower-bounded box intersected with one weighted budget constraint.

    Parameters
    ----------
    lengths : array_like
        Positive weights ``l`` (bar lengths for a truss).
    volume_budget : float
        Upper limit ``V0`` on ``l @ x``.
    lower_bound : float
        Common lower bound ``x_min`` on every component.
    """

    lengths: np.ndarray
    volume_budget: float
    lower_bound: float
    _total_length: float = field(init=False, repr=False)

    def __post_init__(self):
        l = np.array(self.lengths, dtype=float)
        if l.ndim != 1 or l.size == 0:
            raise DimensionMismatch("lengths must be a nonempty vector")
        if not np.all(l > 0):
            raise ValueError("all lengths must be positive")
        if not self.volume_budget > 0 or not self.lower_bound > 0:
            raise ValueError("volume budget and lower bound must be positive")
        l.setflags(write=False)
        object.__setattr__(self, "lengths", l)
        object.__setattr__(self, "volume_budget", float(self.volume_budget))
        object.__setattr__(self, "lower_bound", float(self.lower_bound))
        object.__setattr__(self, "_total_length", float(l.sum()))
        if self.lower_bound * self._total_length > self.volume_budget:
            raise InfeasibleVolumeBudget(
                f"x_min * sum(l) = {self.lower_bound * self._total_length:.6g} exceeds V0 = {self.volume_budget:.6g}"
            )

    @property
    def dimension(self):
        return self.lengths.size

    def project_with_multiplier(self, y):
        """Projection of `y` together with the budget multiplier ``theta``.

        The minimizer has the form ``x_j = max(x_min, y_j - theta * l_j)``.
        The budget residual ``r(theta) = l @ x(theta) - V0`` is continuous,
        piecewise linear and nonincreasing, so ``theta`` is found exactly by
        scanning the sorted breakpoints ``(y_j - x_min) / l_j``.
        """
        y = _check_dim(y, self.dimension)
        l, xmin, V0 = self.lengths, self.lower_bound, self.volume_budget
        x = np.maximum(xmin, y)
        if l @ x <= V0:
            return Projection(x, 0.0)

        bp = (y - xmin) / l
        movable = bp > 0
        order = np.argsort(bp[movable], kind="stable")
        bps = bp[movable][order]
        lm = l[movable][order]
        ym = y[movable][order]
        # Tail sums over the components still above x_min on the segment
        # ending at each breakpoint.
        tail_ly = np.cumsum((lm * ym)[::-1])[::-1]
        tail_ll = np.cumsum((lm * lm)[::-1])[::-1]
        tail_l = np.cumsum(lm[::-1])[::-1]
        floor = xmin * (self._total_length - tail_l)
        r = tail_ly - bps * tail_ll + floor - V0
        hit = np.flatnonzero(r <= 0)
        i = int(hit[0]) if hit.size else bps.size - 1
        theta = (tail_ly[i] + floor[i] - V0) / tail_ll[i]
        theta = max(theta, 0.0)
        x = np.maximum(xmin, y - theta * l)
        # When |y| >> V0, y - theta * l cancels and x carries an absolute error
        # of order eps * |y|.  Shift the free components along l (working at
        # the scale of x, not y) until the budget holds to rounding.
        for _ in range(4):
            excess = l @ x - V0
            free = x > xmin
            if excess <= 0 or not np.any(free):
                break
            shift = excess / np.sum(l[free] ** 2)
            theta += shift
            x[free] = np.maximum(xmin, x[free] - shift * l[free])
        return Projection(x, float(theta))

    def project(self, y):
        return self.project_with_multiplier(y).x

    def contains(self, x, tol=0.0):
        x = _check_dim(x, self.dimension)
        box = float(np.max(self.lower_bound - x))
        budget = float(self.lengths @ x - self.volume_budget)
        return Membership(bool(box <= tol and budget <= tol), box, budget)

    def interior_point(self):
        """The uniform design ``x_j = V0 / sum(l)``."""
        return np.full(self.dimension, self.volume_budget / self._total_length)


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise EmptySet("box has a lower bound above its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self):
        return self.lower.size

    def project(self, y):
        return np.clip(_check_dim(y, self.dimension), self.lower, self.upper)

    def contains(self, x, tol=0.0):
        x = _check_dim(x, self.dimension)
        box = float(max(np.max(self.lower - x), np.max(x - self.upper)))
        return Membership(bool(box <= tol), box, 0.0)


@dataclass(frozen=True)
class EuclideanSpace:
    """The whole of R^m; projection is the identity."""

    dimension: int

    def project(self, y):
        return _check_dim(y, self.dimension).copy()

    def contains(self, x, tol=0.0):
        _check_dim(x, self.dimension)
        return Membership(True, 0.0, 0.0)


def project(fset, y):
    return fset.project(y)


def contains(fset, x, tol=0.0):
    return fset.contains(x, tol)
