"""One full forward evaluation: geometry to objective and constraints.

The chain per design iterate is

    components -> shrink -> two rasters (outer, inner)
    infill variables -> filter -> projection
    fusion -> penalized assembly -> solves -> compliance terms
    outer raster -> component volume; projected infill -> local volume

ForwardModel owns everything that depends only on the problem (element
stiffness, filter and neighborhood operators); ForwardState carries every
intermediate a later sensitivity pass needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields, fusion, geometry, mesh as fem
from .problems import ProblemDefinition
from .smooth import ks_aggregate, ks_weights


@dataclass
class ForwardState:
    """All intermediates of one forward pass at a fixed design and beta."""

    x: np.ndarray
    beta: float
    outer: geometry.ComponentSet
    inner: geometry.ComponentSet
    cache_outer: geometry.NodalTdfCache
    cache_inner: geometry.NodalTdfCache
    rho_raw: np.ndarray        # raw infill variables scattered to all elements
    rho_filt: np.ndarray
    rho_proj: np.ndarray
    rho_outer: np.ndarray      # outer raster, zeroed on passive elements
    rho_inner: np.ndarray
    fused: fusion.FusionResult
    partials: fusion.FusionPartials
    us: list[np.ndarray]
    ucs: list[np.ndarray]
    case_C: list[float]
    case_CM: list[float]
    C: float
    CM: float
    Ctilde: float
    g1: float
    g2: float
    vbar: np.ndarray
    g2_weights: np.ndarray     # aggregation weights scattered to all elements
    q: np.ndarray              # case-weighted u_e^T k^S u_e, fused analysis
    qC: np.ndarray             # same for the coat-only analysis

    @property
    def rho(self) -> np.ndarray:
        return self.fused.rho


class ForwardModel:
    """Problem-bound evaluator; build once, call forward() every iteration."""

    def __init__(self, problem: ProblemDefinition,
                 direct_dof_limit: int = fem.DIRECT_DOF_LIMIT,
                 cg_rtol: float = fem.CG_RTOL):
        self.problem = problem
        self.mesh = problem.mesh
        self.mat = problem.material
        self.ks = fem.element_stiffness_q4(self.mat.E_s, self.mat.nu_s, self.mesh.a)
        self.filter = fields.build_filter(self.mesh, problem.r_min)
        self.neighborhood = fields.NeighborhoodOperator(self.mesh, problem.R_e)
        self.constants = fusion.FusionConstants(L1=problem.params.L1,
                                                L2=problem.params.L2)
        self.direct_dof_limit = direct_dof_limit
        self.cg_rtol = cg_rtol
        self.passive = problem.passive
        self.design = problem.design_elems

    def scatter_simp(self, simp: np.ndarray) -> np.ndarray:
        """Embed the infill design block into a full element vector (passive = 0)."""
        full = np.zeros(self.mesh.n_elems)
        full[self.design] = simp
        return full

    def _analyse(self, rho: np.ndarray, weights, loads, labels):
        """Assemble, factor once, solve every case; returns u's, C's and q."""
        K = fem.assemble(self.mesh, rho, self.mat)
        fact = fem.factorize(K, self.problem.fixed_dofs,
                             self.direct_dof_limit, self.cg_rtol)
        us, cs = [], []
        q = np.zeros(self.mesh.n_elems)
        for f, w, label in zip(loads, weights, labels):
            u = fact.solve(f, label)
            us.append(u)
            cs.append(float(f @ u))
            q += w * fem.element_strain_energy(self.mesh, u, self.ks)
        return us, cs, q

    def forward(self, x: np.ndarray, beta: float) -> ForwardState:
        p = self.problem
        comp_params, simp = p.split_design(x)
        outer = geometry.ComponentSet.from_matrix(comp_params, p=p.params.p, eps=p.eps)
        inner = geometry.shrink(outer, p.t_shell, p.a_min, p.t_min)

        rho_outer, cache_outer = geometry.rasterize(outer, self.mesh, p.params.L2)
        rho_inner, cache_inner = geometry.rasterize(inner, self.mesh, p.params.L2)
        rho_outer[self.passive] = 0.0
        rho_inner[self.passive] = 0.0

        rho_raw = self.scatter_simp(simp)
        rho_filt = self.filter.apply(rho_raw)
        rho_proj = fields.project(rho_filt, beta)

        fused = fusion.fuse(rho_proj, rho_outer, rho_inner, self.constants)
        partials = fusion.fuse_partials(rho_proj, fused.rho_prime,
                                        rho_outer, rho_inner, self.constants,
                                        fused.clamped)

        us, case_C, q = self._analyse(fused.rho, p.case_weights, p.loads,
                                      [f"{lbl}/full" for lbl in p.case_labels])
        ucs, case_CM, qC = self._analyse(rho_outer, p.case_weights, p.loads,
                                         [f"{lbl}/coat" for lbl in p.case_labels])
        C = float(np.dot(p.case_weights, case_C))
        CM = float(np.dot(p.case_weights, case_CM))
        Ctilde = C + p.params.gamma * CM

        g1 = float(rho_outer[self.design].mean() - p.params.V_c)
        vbar = fields.local_volume(self.neighborhood, rho_proj)
        g2 = float(ks_aggregate(vbar[self.design], p.params.L_agg) - p.params.V_loc)
        g2_weights = np.zeros(self.mesh.n_elems)
        g2_weights[self.design] = ks_weights(vbar[self.design], p.params.L_agg)

        return ForwardState(
            x=np.array(x), beta=beta, outer=outer, inner=inner,
            cache_outer=cache_outer, cache_inner=cache_inner,
            rho_raw=rho_raw, rho_filt=rho_filt, rho_proj=rho_proj,
            rho_outer=rho_outer, rho_inner=rho_inner,
            fused=fused, partials=partials,
            us=us, ucs=ucs, case_C=case_C, case_CM=case_CM,
            C=C, CM=CM, Ctilde=Ctilde, g1=g1, g2=g2,
            vbar=vbar, g2_weights=g2_weights, q=q, qC=qC)


def forward(x: np.ndarray, problem: ProblemDefinition, beta: float = 1.0) -> ForwardState:
    """Convenience one-shot forward pass (builds the model each call)."""
    return ForwardModel(problem).forward(x, beta)
