"""Benchmark problem definitions with the published parameter choices.

Every problem accepts a resolution ``scale`` multiplier; filter radius,
influence radius and shell thickness are stored as multiples of the element
size, so their physical extent shrinks with the mesh.  Load and support
placements are single nodes; exact positions follow the usual conventions
for these benchmarks and are documented per builder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .geometry import Component, ComponentSet
from .mesh import LoadCase, MaterialModel, StructuredMesh


@dataclass(frozen=True)
class OptimizationParams:
    """All knobs of one optimization run (lengths in element sizes)."""

    r_min_elems: float = 2.0      # density filter radius / a
    R_e_elems: float = 8.0        # local-volume influence radius / a
    t_elems: float = 3.0          # shell thickness / a
    eps_elems: float = 2.0        # Heaviside transition half-width / a
    eps_floor: float = 0.4        # half-width floor in field units (see eps)
    V_c: float = 0.5              # component volume bound
    V_loc: float = 0.6            # local volume bound
    gamma: float = 0.8            # weight of the coat-only compliance term
    L1: float = -100.0            # smooth-min constant
    L2: float = 200.0             # smooth-max / union constant
    L_agg: float = 200.0          # local-volume aggregation constant
    p: int = 6                    # component superellipse exponent
    beta0: float = 1.0
    beta_max: float = 64.0
    beta_every: int = 100         # fixed-schedule doubling period
    beta_mode: str = "fixed"      # "fixed" or "stagnation"
    max_iters: int = 2000
    tol: float = 5e-4             # max relative design change at convergence
    move_simp: float = 0.2        # MMA move limit, infill variables
    move_mmc: float = 0.1         # MMA move limit, component variables

    def validate(self):
        positive = ["r_min_elems", "R_e_elems", "t_elems", "eps_elems",
                    "V_c", "V_loc", "beta0", "beta_max", "tol",
                    "move_simp", "move_mmc"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.gamma < 0:
            raise ParameterError("gamma must be nonnegative")
        if self.eps_floor < 0:
            raise ParameterError("eps_floor must be nonnegative")
        if not (self.L1 < 0 < self.L2) or self.L_agg <= 0:
            raise ParameterError("aggregation constants must satisfy L1 < 0 < L2, L_agg > 0")
        if self.beta_mode not in ("fixed", "stagnation"):
            raise ParameterError(f"unknown beta_mode {self.beta_mode!r}")


@dataclass
class ProblemDefinition:
    """A fully specified benchmark: mesh, loads, supports, passive set, knobs."""

    name: str
    mesh: StructuredMesh
    width: float
    height: float
    loads: list[np.ndarray]
    case_weights: list[float]
    case_labels: list[str]
    fixed_dofs: np.ndarray
    passive: np.ndarray                  # bool per element: excluded from design
    symmetric: bool
    params: OptimizationParams
    component_grid: tuple[int, int]      # (rows, cols) of the initial crossed grid
    material: MaterialModel = field(default_factory=MaterialModel)

    def __post_init__(self):
        self.params.validate()
        self.design_elems = np.nonzero(~self.passive)[0]

    # -- derived geometry ---------------------------------------------------

    @property
    def a(self) -> float:
        return self.mesh.a

    @property
    def r_min(self) -> float:
        return self.params.r_min_elems * self.a

    @property
    def R_e(self) -> float:
        return self.params.R_e_elems * self.a

    @property
    def t_shell(self) -> float:
        return self.params.t_elems * self.a

    @property
    def eps(self) -> float:
        """Heaviside transition half-width, applied to the union field.

        The component field's boundary slope is p/width, not 1, so a value
        tied only to the element size puts the transition zone far below
        node spacing on fine meshes and geometry gradients vanish; the
        field-units floor keeps the zone resolvable while staying well
        under the interior plateau of 1.
        """
        return max(self.params.eps_elems * self.a, self.params.eps_floor)

    @property
    def a_min(self) -> float:
        return 0.5 * self.a

    @property
    def t_min(self) -> float:
        return 0.5 * self.a

    @property
    def n_simp_vars(self) -> int:
        return self.design_elems.size

    def load_cases(self) -> list[LoadCase]:
        return [LoadCase(f, self.fixed_dofs, label)
                for f, label in zip(self.loads, self.case_labels)]

    # -- design vector layout: [6 per component ...][infill variables] ------

    def n_components_of(self, x: np.ndarray) -> int:
        n_mmc = x.size - self.n_simp_vars
        if n_mmc < 0 or n_mmc % 6 != 0:
            raise ParameterError(
                f"design vector length {x.size} does not fit this problem")
        return n_mmc // 6

    def split_design(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nc = self.n_components_of(x)
        return x[:6 * nc].reshape(nc, 6), x[6 * nc:]

    def join_design(self, comp_params: np.ndarray, simp: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(comp_params).ravel(), simp])

    def component_set(self, x: np.ndarray) -> ComponentSet:
        comp_params, _ = self.split_design(x)
        return ComponentSet.from_matrix(comp_params, p=self.params.p, eps=self.eps)

    def bounds(self, nc: int) -> tuple[np.ndarray, np.ndarray]:
        """Box constraints for nc components plus the infill block."""
        w, h = self.width, self.height
        lo_c = np.array([0.0, 0.0, self.a_min, self.t_min, self.t_min, -math.pi])
        hi_c = np.array([w, h, max(w, h) / 2.0, 0.25 * min(w, h),
                         0.25 * min(w, h), math.pi])
        lo = np.concatenate([np.tile(lo_c, nc), np.zeros(self.n_simp_vars)])
        hi = np.concatenate([np.tile(hi_c, nc), np.ones(self.n_simp_vars)])
        return lo, hi

    def move_limits(self, nc: int) -> np.ndarray:
        """Per-variable MMA move limit as a fraction of the box range."""
        return np.concatenate([
            np.full(6 * nc, self.params.move_mmc),
            np.full(self.n_simp_vars, self.params.move_simp)])


def _resolution(base: int, scale: float) -> int:
    n = int(round(base * scale))
    n -= n % 2  # keep mid-edge nodes and quadrant boundaries on the grid
    if n < 4:
        raise ParameterError(f"resolution scale {scale} gives a degenerate mesh")
    return n


def _apply_overrides(params: OptimizationParams, overrides: dict) -> OptimizationParams:
    if overrides:
        params = replace(params, **overrides)
    return params


def lbeam(scale: float = 1.0, component_grid: tuple[int, int] = (4, 4),
          **param_overrides) -> ProblemDefinition:
    """L-shaped beam: 2x2 domain with a passive-void 1x1 upper-right quadrant.

    The top edge of the remaining L (y = 2, x in [0, 1]) is clamped; a unit
    downward load acts at (2, 1), the outer corner of the lower arm.
    """
    n = _resolution(300, scale)
    mesh = StructuredMesh(n, n, 2.0 / n)
    centers = mesh.elem_centers
    passive = (centers[:, 0] > 1.0) & (centers[:, 1] > 1.0)

    top_nodes = [mesh.node_index(ix, n) for ix in range(n + 1)
                 if ix * mesh.a <= 1.0 + 1e-12]
    fixed = np.sort(np.concatenate([2 * np.array(top_nodes),
                                    2 * np.array(top_nodes) + 1]))
    f = np.zeros(mesh.n_dofs)
    f[mesh.dof_index(n, n // 2, 1)] = -1.0

    params = _apply_overrides(
        OptimizationParams(t_elems=3.0, V_c=0.5), param_overrides)
    return ProblemDefinition(
        name="lbeam", mesh=mesh, width=2.0, height=2.0,
        loads=[f], case_weights=[1.0], case_labels=["tip"],
        fixed_dofs=fixed, passive=passive, symmetric=False,
        params=params, component_grid=component_grid)


def mbb(scale: float = 1.0, component_grid: tuple[int, int] = (3, 6),
        **param_overrides) -> ProblemDefinition:
    """MBB beam, half model (symmetry plane at the left edge).

    Horizontal DOFs are fixed along x = 0, the vertical DOF at the
    bottom-right corner node is the roller, and the unit downward load acts
    at the top of the symmetry plane.
    """
    nx = _resolution(1200, scale)
    ny = nx // 2
    mesh = StructuredMesh(nx, ny, 2.0 / nx)
    sym_nodes = np.array([mesh.node_index(0, iy) for iy in range(ny + 1)])
    fixed = np.sort(np.concatenate([2 * sym_nodes,
                                    [mesh.dof_index(nx, 0, 1)]]))
    f = np.zeros(mesh.n_dofs)
    f[mesh.dof_index(0, ny, 1)] = -1.0

    params = _apply_overrides(
        OptimizationParams(t_elems=8.0, V_c=0.6), param_overrides)
    return ProblemDefinition(
        name="mbb", mesh=mesh, width=2.0, height=1.0,
        loads=[f], case_weights=[1.0], case_labels=["midspan"],
        fixed_dofs=fixed, passive=np.zeros(mesh.n_elems, dtype=bool),
        symmetric=True, params=params, component_grid=component_grid)


def multiload(scale: float = 1.0, component_grid: tuple[int, int] = (4, 4),
              **param_overrides) -> ProblemDefinition:
    """Bridge-like beam under five vertical top-edge loads, half model.

    The full 2:1 domain carries unit loads at x = 0, W/4, W/2, 3W/4, W along
    the top edge; the half model keeps the three left ones as separate cases
    (the symmetry-plane load at half magnitude) and weights each case 2/5 so
    the objective represents the five-load average.  The pin sits at the
    lower outer corner; the inner edge carries the symmetry condition.
    """
    n = _resolution(300, scale)
    mesh = StructuredMesh(n, n, 1.0 / n)
    sym_nodes = np.array([mesh.node_index(n, iy) for iy in range(n + 1)])
    pin = mesh.node_index(0, 0)
    fixed = np.sort(np.concatenate([2 * sym_nodes, [2 * pin, 2 * pin + 1]]))

    loads, labels = [], []
    for ix, mag, label in [(0, 1.0, "outer"), (n // 2, 1.0, "quarter"),
                           (n, 0.5, "midspan")]:
        f = np.zeros(mesh.n_dofs)
        f[mesh.dof_index(ix, n, 1)] = -mag
        loads.append(f)
        labels.append(label)

    params = _apply_overrides(
        OptimizationParams(t_elems=8.0, V_c=0.6), param_overrides)
    return ProblemDefinition(
        name="multiload", mesh=mesh, width=1.0, height=1.0,
        loads=loads, case_weights=[0.4, 0.4, 0.4], case_labels=labels,
        fixed_dofs=fixed, passive=np.zeros(mesh.n_elems, dtype=bool),
        symmetric=True, params=params, component_grid=component_grid)


def checkgrad(**param_overrides) -> ProblemDefinition:
    """Small deterministic instance used by the gradient verification suite.

    Left and bottom edges are clamped so the solid structure is stiff
    (compliance ~3); that keeps central differences of the compliance far
    above double-precision rounding noise for every design variable.
    """
    n = 12
    mesh = StructuredMesh(n, n, 1.0 / n)
    edge = sorted({mesh.node_index(0, iy) for iy in range(n + 1)}
                  | {mesh.node_index(ix, 0) for ix in range(n + 1)})
    edge = np.array(edge)
    fixed = np.sort(np.concatenate([2 * edge, 2 * edge + 1]))
    f = np.zeros(mesh.n_dofs)
    f[mesh.dof_index(n, n // 2, 1)] = -1.0

    params = _apply_overrides(
        OptimizationParams(t_elems=2.0, R_e_elems=3.0, V_c=0.5, eps_floor=0.0),
        param_overrides)
    return ProblemDefinition(
        name="checkgrad", mesh=mesh, width=1.0, height=1.0,
        loads=[f], case_weights=[1.0], case_labels=["tip"],
        fixed_dofs=fixed, passive=np.zeros(mesh.n_elems, dtype=bool),
        symmetric=False, params=params, component_grid=(1, 1))


def checkgrad_design(problem: ProblemDefinition) -> np.ndarray:
    """Deterministic, deliberately asymmetric design for FD verification.

    The two bars overlap mid-span and reach from the clamped edges to the
    load; widths exceed the shell thickness plus the shrink floor so the
    clamped shrink branch stays inactive (it has its own tests).
    """
    comps = np.array([
        [0.32, 0.56, 0.46, 0.260, 0.235, 0.17],
        [0.64, 0.44, 0.50, 0.240, 0.270, -0.12],
    ])
    centers = problem.mesh.elem_centers[problem.design_elems]
    wave = np.sin(2.0 * np.pi * 1.3 * centers[:, 0] + 0.4) \
        * np.sin(2.0 * np.pi * 0.9 * centers[:, 1] + 1.1)
    simp = 0.62 + 0.18 * wave
    return problem.join_design(comps, simp)


def initial_components(problem: ProblemDefinition,
                       grid: tuple[int, int] | None = None) -> ComponentSet:
    """Crossed-pair component layout on a rows-by-cols grid of cells.

    Each cell holds two components spanning its diagonals; cells centered in
    a passive region are skipped (they would carry identically zero
    gradients).
    """
    rows, cols = grid or problem.component_grid
    if rows < 1 or cols < 1:
        raise ParameterError(f"component grid must be at least 1x1, got {rows}x{cols}")
    cw, ch = problem.width / cols, problem.height / rows
    half_diag = 0.45 * math.hypot(cw, ch)
    tilt = math.atan2(ch, cw)
    t0 = 0.04 * min(problem.width, problem.height)
    mesh = problem.mesh
    comps = []
    for r in range(rows):
        for c in range(cols):
            cx, cy = (c + 0.5) * cw, (r + 0.5) * ch
            ex = min(int(cx / mesh.a), mesh.nx - 1)
            ey = min(int(cy / mesh.a), mesh.ny - 1)
            if problem.passive[mesh.elem_index(ex, ey)]:
                continue
            comps.append(Component(cx, cy, half_diag, t0, t0, tilt))
            comps.append(Component(cx, cy, half_diag, t0, t0, -tilt))
    return ComponentSet(tuple(comps), p=problem.params.p, eps=problem.eps)


def initial_design(problem: ProblemDefinition,
                   grid: tuple[int, int] | None = None) -> np.ndarray:
    """Full starting design: crossed components plus uniform infill at V_loc."""
    cset = initial_components(problem, grid)
    simp = np.full(problem.n_simp_vars, problem.params.V_loc)
    return problem.join_design(cset.as_matrix(), simp)
