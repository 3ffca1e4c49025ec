"""Feasible smoothing accelerated projected gradient methods.

Nonsmooth convex minimization over sets where the objective is defined only
on the feasible region, with a truss robust-compliance application.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyInput,
    InfeasibleVolumeBudget,
    InvalidGeometry,
    NoConvergence,
    NotPositiveDefinite,
    NumericalBreakdown,
    SapgError,
)
from .feasible_set import Box, BoxBudgetSet, EuclideanSpace
from .smoothing import (
    AffineMatrixMap,
    FiniteMaxObjective,
    QuadraticObjective,
    SmoothedObjective,
    SmoothingConstants,
    SpectralLseObjective,
)
from .solvers import Algorithm, SolverConfig, run, theorem_bound

__version__ = "0.1.0"
