"""Plane truss ground structures and the robust compliance objective.

For cross-sectional areas ``x`` the global stiffness is
``K(x) = sum_j x_j (E / l_j) b_j b_j^T`` and the worst-case compliance over
the load ellipsoid ``{Q f : |f| = 1}`` is ``lambda_max(Q^T K(x)^{-1} Q)``.
"""

import logging
from dataclasses import dataclass, field
from math import gcd
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, InvalidGeometry, NotPositiveDefinite
from .feasible_set import BoxBudgetSet
from .linalg import chol_solve, cholesky
from .smoothing import MatrixMap, SpectralLseObjective

log = logging.getLogger(__name__)

__all__ = [
    "GroundStructure",
    "ElementStiffness",
    "LoadColumn",
    "LoadUncertainty",
    "TrussMatrixMap",
    "RobustComplianceProblem",
    "InstanceConfig",
    "build_grid_ground_structure",
    "assemble_stiffness",
    "eval_A",
    "eval_dA",
    "build_paper_instance",
    "describe_instance",
]


@dataclass(frozen=True)
class GroundStructure:
    """Nodes, bars and supports of a 2D truss.

    ``fixed_dofs`` uses global numbering ``2 * node + axis`` (axis 0 = x).
    """

    nodes: np.ndarray
    bars: np.ndarray
    fixed_dofs: Tuple[int, ...]
    young_modulus: float = 2.0e11

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        bars = np.array(self.bars, dtype=int).reshape(-1, 2)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or len(nodes) < 2:
            raise InvalidGeometry("nodes must be an (N, 2) array with N >= 2")
        if len(bars) == 0:
            raise InvalidGeometry("no bars")
        if bars.min() < 0 or bars.max() >= len(nodes):
            raise InvalidGeometry("bar references a missing node")
        pairs = {tuple(sorted(b)) for b in bars.tolist()}
        if len(pairs) != len(bars):
            raise InvalidGeometry("duplicate bars")
        if not self.young_modulus > 0:
            raise InvalidGeometry("Young's modulus must be positive")
        fixed = tuple(sorted(set(int(d) for d in self.fixed_dofs)))
        if fixed and (fixed[0] < 0 or fixed[-1] >= 2 * len(nodes)):
            raise InvalidGeometry("fixed dof out of range")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "bars", bars)
        object.__setattr__(self, "fixed_dofs", fixed)
        if np.any(self.lengths <= 0):
            raise InvalidGeometry("zero-length bar")
        if self.free_dof_count == 0:
            raise InvalidGeometry("every degree of freedom is fixed")
        try:
            cholesky(assemble_stiffness(ElementStiffness.from_structure(self), np.ones(len(bars))))
        except NotPositiveDefinite:
            raise InvalidGeometry("structure is kinematically unstable") from None

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def bar_count(self):
        return len(self.bars)

    @property
    def lengths(self):
        d = self.nodes[self.bars[:, 1]] - self.nodes[self.bars[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def free_dofs(self):
        return np.setdiff1d(np.arange(2 * self.node_count), self.fixed_dofs)

    @property
    def free_dof_count(self):
        return 2 * self.node_count - len(self.fixed_dofs)

    def dof_map(self):
        """Global dof -> free dof index, ``-1`` for supported dofs."""
        out = np.full(2 * self.node_count, -1)
        out[self.free_dofs] = np.arange(self.free_dof_count)
        return out


def build_grid_ground_structure(cols, rows, spacing=1.0, level=1, young_modulus=2.0e11, fixed_nodes=None):
    """Rectangular grid of nodes joined by bars up to a neighbour level.

    Nodes are numbered row by row, ``node = row * cols + col``, at
    ``(col * spacing, row * spacing)``.  Two nodes are joined when their
    grid offsets satisfy ``|dc|, |dr| <= level`` and ``gcd(|dc|, |dr|) == 1``
    (collinear overlapping bars are skipped).  Level 1 gives horizontal,
    vertical and diagonal neighbours.

    By default the left edge (``col == 0``) is pinned in both directions.
    """
    if cols < 2 or rows < 2:
        raise InvalidGeometry(f"grid needs at least 2 columns and 2 rows, got {cols}x{rows}")
    if not spacing > 0:
        raise InvalidGeometry("spacing must be positive")
    if level < 1:
        raise InvalidGeometry("neighbour level must be at least 1")
    c, r = np.meshgrid(np.arange(cols), np.arange(rows))
    nodes = np.column_stack([c.ravel(), r.ravel()]) * float(spacing)

    offsets = [
        (dc, dr)
        for dr in range(0, level + 1)
        for dc in range(-level, level + 1)
        if (dr > 0 or dc > 0) and gcd(abs(dc), dr) == 1
    ]
    bars = []
    for row in range(rows):
        for col in range(cols):
            for dc, dr in offsets:
                c2, r2 = col + dc, row + dr
                if 0 <= c2 < cols and 0 <= r2 < rows:
                    bars.append((row * cols + col, r2 * cols + c2))
    if fixed_nodes is None:
        fixed_nodes = [row * cols for row in range(rows)]
    fixed = [2 * n + a for n in fixed_nodes for a in (0, 1)]
    return GroundStructure(nodes, np.array(bars), tuple(fixed), float(young_modulus))


@dataclass(frozen=True)
class ElementStiffness:
    """Rank-one element matrices ``K_j = stiffness[j] * b_j b_j^T`` on the free dofs.

    ``embedding[:, j]`` is ``b_j``: the direction cosines ``(-c, -s, c, s)``
    scattered to the bar's end dofs, supported dofs dropped.
    """

    embedding: np.ndarray
    stiffness: np.ndarray

    @classmethod
    def from_structure(cls, gs):
        l = gs.lengths
        d = gs.nodes[gs.bars[:, 1]] - gs.nodes[gs.bars[:, 0]]
        cs = d / l[:, None]
        dof_map = gs.dof_map()
        B = np.zeros((gs.free_dof_count, gs.bar_count))
        for j, (a, b) in enumerate(gs.bars):
            for node, sign in ((a, -1.0), (b, 1.0)):
                for axis in (0, 1):
                    k = dof_map[2 * node + axis]
                    if k >= 0:
                        B[k, j] = sign * cs[j, axis]
        return cls(B, gs.young_modulus / l)

    @property
    def dof_count(self):
        return self.embedding.shape[0]

    @property
    def bar_count(self):
        return self.embedding.shape[1]

    def element_matrix(self, j):
        b = self.embedding[:, j]
        return self.stiffness[j] * np.outer(b, b)


def assemble_stiffness(elements, x):
    """``K(x) = sum_j x_j K_j`` as a dense symmetric matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (elements.bar_count,):
        raise DimensionMismatch(f"expected {elements.bar_count} areas, got shape {x.shape}")
    B = elements.embedding
    K = (B * (elements.stiffness * x)) @ B.T
    return 0.5 * (K + K.T)


@dataclass(frozen=True)
class LoadColumn:
    node: int
    direction: Tuple[float, float]
    magnitude: float


@dataclass(frozen=True)
class LoadUncertainty:
    """Load matrix ``Q``; the admissible loads are ``Q f`` with ``|f| = 1``."""

    Q: np.ndarray

    @classmethod
    def from_columns(cls, gs, columns):
        """Build ``Q`` from ``(node, unit direction, magnitude)`` specifications."""
        dof_map = gs.dof_map()
        Q = np.zeros((gs.free_dof_count, len(columns)))
        for i, col in enumerate(columns):
            if not 0 <= col.node < gs.node_count:
                raise InvalidGeometry(f"load node {col.node} does not exist")
            u = np.asarray(col.direction, dtype=float)
            u = u / np.linalg.norm(u)
            for axis in (0, 1):
                k = dof_map[2 * col.node + axis]
                if k >= 0:
                    Q[k, i] = col.magnitude * u[axis]
                elif u[axis] != 0:
                    raise InvalidGeometry(f"load column {i} acts on supported dof {2 * col.node + axis}")
        if Q.shape[1] > Q.shape[0]:
            raise InvalidGeometry(f"{Q.shape[1]} load columns exceed {Q.shape[0]} free dofs")
        return cls(Q)

    @property
    def n(self):
        return self.Q.shape[1]


class TrussMatrixMap(MatrixMap):
    """``A(x) = Q^T K(x)^{-1} Q`` with ``dA/dx_j = -k_j (W^T b_j)(b_j^T W)``, ``W = K^{-1} Q``."""

    def __init__(self, elements, load):
        if load.Q.shape[0] != elements.dof_count:
            raise DimensionMismatch("load matrix rows must match the free dof count")
        self.elements = elements
        self.Q = load.Q
        self.dimension = elements.bar_count
        self.order = load.n

    def _solve(self, x):
        F = cholesky(assemble_stiffness(self.elements, x))
        return chol_solve(F, self.Q)

    def linearize(self, x):
        W = self._solve(x)
        A = self.Q.T @ W
        A = 0.5 * (A + A.T)
        BtW = self.elements.embedding.T @ W
        k = self.elements.stiffness

        def pullback(U, w):
            G = BtW @ U
            return -k * ((G * G) @ w)

        return A, pullback

    def matrix(self, x):
        A = self.Q.T @ self._solve(x)
        return 0.5 * (A + A.T)

    def partial(self, x, j):
        if not 0 <= j < self.dimension:
            raise IndexOutOfRange(f"bar index {j} outside [0, {self.dimension})")
        g = self._solve(x).T @ self.elements.embedding[:, j]
        return -self.elements.stiffness[j] * np.outer(g, g)


@dataclass(frozen=True)
class InstanceConfig:
    """Geometry, material, loading and budget of a grid truss instance.

    ``horizontal_axis`` and ``vertical_axis`` describe the load ellipse.  With
    ``axis_mode="full"`` they are full axis lengths and the columns of ``Q``
    carry half of each; ``"semi"`` uses them as given.

    ``load_layout="single"`` applies the ellipse at ``load_node`` (two
    columns).  ``"spread"`` applies the same ellipse at the ``spread_nodes``
    free nodes closest to ``load_node``, giving ``2 * spread_nodes`` columns.
    """

    cols: int = 9
    rows: int = 3
    spacing: float = 1.0
    level: int = 1
    young_modulus: float = 2.0e11
    volume_budget: float = 0.1
    x_min: float = 1.0e-8
    supports: str = "bottom"
    load_node: Optional[Tuple[int, int]] = None
    load_layout: str = "single"
    spread_nodes: int = 10
    horizontal_axis: float = 2.0e5
    vertical_axis: float = 2.78e5
    axis_mode: str = "full"
    L: float = 1.0e5
    Lprime: float = 0.0
    eig_method: str = "jacobi"

    def semi_axes(self):
        if self.axis_mode == "full":
            return 0.5 * self.horizontal_axis, 0.5 * self.vertical_axis
        if self.axis_mode == "semi":
            return self.horizontal_axis, self.vertical_axis
        raise ValueError(f"axis_mode must be 'full' or 'semi', got {self.axis_mode!r}")

    def load_grid_position(self):
        """(col, row) of the loaded node; default is the middle of the top edge."""
        if self.load_node is None:
            return self.cols // 2, self.rows - 1
        return tuple(self.load_node)


@dataclass(frozen=True)
class RobustComplianceProblem:
    structure: GroundStructure
    elements: ElementStiffness
    load: LoadUncertainty
    feasible: BoxBudgetSet
    objective: SpectralLseObjective
    config: Optional[InstanceConfig] = field(default=None, compare=False)

    def __post_init__(self):
        if self.feasible.dimension != self.structure.bar_count:
            raise DimensionMismatch("feasible set dimension must equal the bar count")
        if self.load.Q.shape[0] != self.structure.free_dof_count:
            raise DimensionMismatch("load matrix rows must equal the free dof count")

    @property
    def matrix_map(self):
        return self.objective.matrix_map

    def eval_A(self, x):
        return self.matrix_map.matrix(x)

    def eval_dA(self, x, j):
        return self.matrix_map.partial(x, j)

    def initial_design(self):
        """Uniform areas spending the whole budget, projected onto the feasible set."""
        return self.feasible.project(self.feasible.interior_point())

    def describe(self):
        gs = self.structure
        total = float(gs.lengths.sum())
        return {
            "nodes": gs.node_count,
            "bars": gs.bar_count,
            "free_dofs": gs.free_dof_count,
            "load_columns": self.load.n,
            "total_length": total,
            "min_volume": self.feasible.lower_bound * total,
            "budget_feasible": self.feasible.lower_bound * total <= self.feasible.volume_budget,
        }


def eval_A(problem, x):
    return problem.eval_A(x)


def eval_dA(problem, x, j):
    return problem.eval_dA(x, j)


def _load_columns(cfg, gs):
    col, row = cfg.load_grid_position()
    if not (0 <= col < cfg.cols and 0 <= row < cfg.rows):
        raise InvalidGeometry(f"load node ({col}, {row}) outside the {cfg.cols}x{cfg.rows} grid")
    hx, hy = cfg.semi_axes()
    if cfg.load_layout == "single":
        nodes = [row * cfg.cols + col]
    elif cfg.load_layout == "spread":
        fixed_nodes = {d // 2 for d in gs.fixed_dofs}
        free = [k for k in range(gs.node_count) if k not in fixed_nodes]
        origin = gs.nodes[row * cfg.cols + col]
        dist = np.linalg.norm(gs.nodes[free] - origin, axis=1)
        order = np.lexsort((free, np.round(dist, 12)))
        nodes = [free[i] for i in order[: cfg.spread_nodes]]
    else:
        raise ValueError(f"load_layout must be 'single' or 'spread', got {cfg.load_layout!r}")
    columns = []
    for node in nodes:
        columns.append(LoadColumn(node, (1.0, 0.0), hx))
        columns.append(LoadColumn(node, (0.0, 1.0), hy))
    return columns


def _ground_structure(cfg):
    if cfg.supports == "left":
        fixed_nodes = None
    elif cfg.supports == "bottom":
        fixed_nodes = list(range(cfg.cols))
    elif cfg.supports == "corners":
        fixed_nodes = [0, cfg.cols - 1]
    else:
        raise ValueError(f"unknown support pattern {cfg.supports!r}")
    return build_grid_ground_structure(cfg.cols, cfg.rows, cfg.spacing, cfg.level, cfg.young_modulus, fixed_nodes)


def describe_instance(config=None):
    """Size report for an instance; never fails on an infeasible budget.

    Returns the same keys as :meth:`RobustComplianceProblem.describe`.
    """
    cfg = config or InstanceConfig()
    gs = _ground_structure(cfg)
    load = LoadUncertainty.from_columns(gs, _load_columns(cfg, gs))
    total = float(gs.lengths.sum())
    return {
        "nodes": gs.node_count,
        "bars": gs.bar_count,
        "free_dofs": gs.free_dof_count,
        "load_columns": load.n,
        "total_length": total,
        "min_volume": cfg.x_min * total,
        "budget_feasible": cfg.x_min * total <= cfg.volume_budget,
    }


def build_paper_instance(config=None):
    """Assemble a :class:`RobustComplianceProblem` from an :class:`InstanceConfig`.

    The defaults give a 9 x 3 grid (74 bars at level 1) pinned along its
    bottom edge, with the load ellipse at the middle node of the top edge.
    ``supports`` may be ``"bottom"``, ``"left"`` (cantilever) or
    ``"corners"`` (bottom corners only).
    """
    cfg = config or InstanceConfig()
    gs = _ground_structure(cfg)
    elements = ElementStiffness.from_structure(gs)
    load = LoadUncertainty.from_columns(gs, _load_columns(cfg, gs))
    feasible = BoxBudgetSet(gs.lengths, cfg.volume_budget, cfg.x_min)
    objective = SpectralLseObjective(TrussMatrixMap(elements, load), cfg.L, cfg.Lprime, cfg.eig_method)
    log.info("built truss instance: %d bars, %d free dofs, %d load columns", gs.bar_count, gs.free_dof_count, load.n)
    return RobustComplianceProblem(gs, elements, load, feasible, objective, cfg)
