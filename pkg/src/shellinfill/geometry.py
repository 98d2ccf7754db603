"""Explicit component geometry and its rasterization to element densities.

A component is a superellipse-like bar: positive inside, zero on the
boundary, negative outside.  A structure is the smooth (log-sum-exp) union
of all component fields, pushed through a regularized Heaviside and averaged
over each element's four corner nodes.  Shrinking every component by the
shell thickness yields the inner region whose complement defines the coat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .smooth import ks_aggregate

# stand-in for "certainly outside" where the width law degenerates (b <= 0
# only happens beyond the component's ends, where the field is negative anyway)
_FAR_OUTSIDE = -1e30

DEFAULT_UNION_L = 200.0


@dataclass(frozen=True)
class Component:
    """One bar: center, half-length, end half-widths, inclination (radians)."""

    x0: float
    y0: float
    a: float
    t1: float
    t2: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.a, self.t1, self.t2, self.theta])


@dataclass(frozen=True)
class ComponentSet:
    """An ordered collection of components with shared shape constants."""

    components: tuple[Component, ...]
    p: int = 6            # superellipse exponent, positive even integer
    eps: float = 0.05     # Heaviside transition half-width (length units)

    def __post_init__(self):
        if self.p < 2 or self.p % 2 != 0:
            raise ParameterError(f"exponent p must be a positive even integer, got {self.p}")
        if self.eps <= 0:
            raise ParameterError(f"transition half-width must be positive, got {self.eps}")

    def __len__(self) -> int:
        return len(self.components)

    def as_matrix(self) -> np.ndarray:
        """(NC, 6) parameter matrix in (x0, y0, a, t1, t2, theta) order."""
        if not self.components:
            return np.zeros((0, 6))
        return np.vstack([c.as_array() for c in self.components])

    @staticmethod
    def from_matrix(params: np.ndarray, p: int = 6, eps: float = 0.05) -> "ComponentSet":
        comps = tuple(Component(*row) for row in np.atleast_2d(params)) if params.size else ()
        return ComponentSet(comps, p=p, eps=eps)


def _local_frame(c: Component, pts: np.ndarray):
    dx = pts[:, 0] - c.x0
    dy = pts[:, 1] - c.y0
    cos_t, sin_t = np.cos(c.theta), np.sin(c.theta)
    xl = cos_t * dx + sin_t * dy
    yl = -sin_t * dx + cos_t * dy
    b = 0.5 * (c.t1 + c.t2) + 0.5 * (c.t2 - c.t1) * xl / c.a
    return xl, yl, b, cos_t, sin_t


def tdf_component(c: Component, p: int, pts: np.ndarray) -> np.ndarray:
    """Field of one component at pts (N, 2): >0 inside, 0 on the boundary."""
    xl, yl, b, _, _ = _local_frame(c, pts)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phi = 1.0 - (xl / c.a) ** p - (yl / b) ** p
    # the linear width law can vanish beyond the bar ends; those points are
    # provably outside (|xl| > a there), so pin them far negative
    bad = (b <= 0.0) | ~np.isfinite(phi)
    if bad.any():
        phi = np.where(bad, _FAR_OUTSIDE, phi)
    return phi


def tdf_param_gradient(c: Component, p: int, pts: np.ndarray) -> np.ndarray:
    """(6, N) derivatives of the field wrt (x0, y0, a, t1, t2, theta)."""
    xl, yl, b, cos_t, sin_t = _local_frame(c, pts)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = xl / c.a
        v = yl / b
        up1 = u ** (p - 1)
        vp1 = v ** (p - 1)
        vp = vp1 * v
        b_slope = 0.5 * (c.t2 - c.t1) / c.a
        dphi_dxl = -(p / c.a) * up1 + (p * b_slope / b) * vp
        dphi_dyl = -(p / b) * vp1
        g = np.empty((6, pts.shape[0]))
        g[0] = -cos_t * dphi_dxl + sin_t * dphi_dyl
        g[1] = -sin_t * dphi_dxl - cos_t * dphi_dyl
        g[2] = (p / c.a) * up1 * u - (p / b) * vp * b_slope * xl / c.a
        g[3] = (p / b) * vp * (0.5 - 0.5 * xl / c.a)
        g[4] = (p / b) * vp * (0.5 + 0.5 * xl / c.a)
        g[5] = dphi_dxl * yl - dphi_dyl * xl
    bad = (b <= 0.0) | ~np.isfinite(g).all(axis=0)
    if bad.any():
        g[:, bad] = 0.0
    return g


def smooth_union(phi_values: np.ndarray, L: float = DEFAULT_UNION_L) -> float:
    """Smooth max over one point's per-component field values."""
    if L <= 0:
        raise ParameterError(f"union aggregation constant must be positive, got {L}")
    return ks_aggregate(phi_values, L)


def heaviside(x: np.ndarray, eps: float) -> np.ndarray:
    """Regularized step: 0 below -eps, cubic ramp inside, 1 above eps."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    out[x > eps] = 1.0
    band = (x >= -eps) & (x <= eps)
    xb = x[band]
    out[band] = 0.75 * (xb / eps - xb ** 3 / (3.0 * eps ** 3)) + 0.5
    return out


def heaviside_deriv(x: np.ndarray, eps: float) -> np.ndarray:
    """Derivative of the regularized step (continuous, zero outside the band)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    band = (x >= -eps) & (x <= eps)
    xb = x[band]
    out[band] = 0.75 * (1.0 / eps - xb ** 2 / eps ** 3)
    return out


@dataclass
class NodalTdfCache:
    """Union field at the mesh nodes, kept for the sensitivity pass.

    shift/expsum are the pieces of the max-shifted log-sum-exp, so the union
    weight of component i at a node is exp(L*(phi_i - shift)) / expsum.
    """

    phi: np.ndarray
    shift: np.ndarray
    expsum: np.ndarray
    eps: float
    union_L: float


def union_tdf(cset: ComponentSet, pts: np.ndarray,
              union_L: float = DEFAULT_UNION_L) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smooth-union field at pts, plus its log-sum-exp pieces.

    Streams over components so memory stays O(points) regardless of NC.
    """
    n = pts.shape[0]
    shift = np.full(n, -np.inf)
    expsum = np.zeros(n)
    for comp in cset.components:
        phi_i = tdf_component(comp, cset.p, pts)
        new_shift = np.maximum(shift, phi_i)
        with np.errstate(over="ignore"):
            expsum = expsum * np.exp(union_L * (shift - new_shift)) \
                + np.exp(union_L * (phi_i - new_shift))
        shift = new_shift
    if len(cset.components) == 0:
        return shift, shift, expsum  # all -inf: empty structure sentinel
    phi = shift + np.log(expsum) / union_L
    return phi, shift, expsum


def rasterize(cset: ComponentSet, mesh, union_L: float = DEFAULT_UNION_L
              ) -> tuple[np.ndarray, NodalTdfCache]:
    """Element densities: corner-node average of the Heaviside of the union field."""
    phi, shift, expsum = union_tdf(cset, mesh.node_coords, union_L)
    h = heaviside(phi, cset.eps)
    rho = h[mesh.elem_nodes].mean(axis=1)
    return rho, NodalTdfCache(phi=phi, shift=shift, expsum=expsum,
                              eps=cset.eps, union_L=union_L)


def shrink(cset: ComponentSet, t: float, a_min: float, t_min: float) -> ComponentSet:
    """Inner component set: half-length and half-widths reduced by t, clamped."""
    if t <= 0:
        raise ParameterError(f"shell thickness must be positive, got {t}")
    inner = tuple(
        Component(c.x0, c.y0,
                  max(c.a - t, a_min),
                  max(c.t1 - t, t_min),
                  max(c.t2 - t, t_min),
                  c.theta)
        for c in cset.components)
    return ComponentSet(inner, p=cset.p, eps=cset.eps)


def shrink_active(cset: ComponentSet, t: float, a_min: float, t_min: float) -> np.ndarray:
    """(NC, 3) mask: does (a, t1, t2) still move after the shrink clamp?"""
    if not cset.components:
        return np.zeros((0, 3), dtype=bool)
    m = cset.as_matrix()
    return np.column_stack([m[:, 2] - t > a_min,
                            m[:, 3] - t > t_min,
                            m[:, 4] - t > t_min])
