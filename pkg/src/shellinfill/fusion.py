"""Welding of the infill field and the two component rasters.

The physical density is smooth-min(smooth-max(infill, 1 - inner), outer):
the coat band (outer solid, inner void) forces 1, the exterior forces 0,
and deep inside the inner region the infill shows through.  Smooth min/max
are used in the forward model too, so the analytic gradient is the exact
gradient of the computed objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .smooth import ks_pair, ks_pair_weights


@dataclass(frozen=True)
class FusionConstants:
    """Aggregation constants: L1 < 0 drives the min, L2 > 0 the max."""

    L1: float = -100.0
    L2: float = 200.0

    def __post_init__(self):
        if not (self.L1 < 0.0 < self.L2):
            raise ParameterError(
                f"fusion constants must satisfy L1 < 0 < L2, got {self.L1}, {self.L2}")


@dataclass
class FusionResult:
    rho: np.ndarray          # final physical density, clamped to [0, 1]
    rho_prime: np.ndarray    # smooth max of (infill, 1 - inner)
    clamped: np.ndarray      # where the clamp at 0 was active


def fuse(rho_proj: np.ndarray, rho_outer: np.ndarray, rho_inner: np.ndarray,
         k: FusionConstants) -> FusionResult:
    """Combine the three element fields into the physical density.

    The smooth max can overshoot 1 by log(2)/L2 and the smooth min undershoot
    0 by log(2)/|L1|; the final density is clamped back to [0, 1].  The smooth
    min of values <= 1 never exceeds 1, so only the lower clamp can engage.
    """
    rho_prime = ks_pair(rho_proj, 1.0 - rho_inner, k.L2)
    raw = ks_pair(rho_prime, rho_outer, k.L1)
    clamped = raw < 0.0
    return FusionResult(rho=np.clip(raw, 0.0, 1.0), rho_prime=rho_prime,
                        clamped=clamped)


@dataclass
class FusionPartials:
    """Per-element partial derivatives of the fused density.

    All four follow the active-set convention at the clamp: zero where the
    final density was clamped.
    """

    d_proj: np.ndarray    # wrt the projected infill density
    d_outer: np.ndarray   # wrt the outer component raster
    d_inner: np.ndarray   # wrt the inner component raster
    d_prime: np.ndarray   # wrt the intermediate smooth max


def fuse_partials(rho_proj: np.ndarray, rho_prime: np.ndarray,
                  rho_outer: np.ndarray, rho_inner: np.ndarray,
                  k: FusionConstants,
                  clamped: np.ndarray | None = None) -> FusionPartials:
    """Softmin/softmax weights of the two fusion stages, chained."""
    w_proj, w_void = ks_pair_weights(rho_proj, 1.0 - rho_inner, k.L2)
    w_prime, w_outer = ks_pair_weights(rho_prime, rho_outer, k.L1)
    if clamped is not None and clamped.any():
        w_prime = np.where(clamped, 0.0, w_prime)
        w_outer = np.where(clamped, 0.0, w_outer)
    return FusionPartials(
        d_proj=w_prime * w_proj,
        d_outer=w_outer,
        d_inner=-w_prime * w_void,
        d_prime=w_prime,
    )
