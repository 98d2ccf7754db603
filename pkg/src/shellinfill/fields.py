"""Implicit infill field operators: density filter, projection, local volume.

All operators live on the structured mesh and are built once per run; they
are immutable and cheap to apply every iteration.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage
import scipy.sparse as sp

from .errors import ConfigError, ParameterError
from .smooth import ks_aggregate, ks_weights

# beyond this many stored neighbor entries, the local-volume operator switches
# from an explicit sparse matrix to a stencil convolution
_MATRIX_NNZ_LIMIT = 30_000_000


def _window_offsets(radius_elems: float, strict: bool) -> np.ndarray:
    """Integer (dx, dy) offsets with center distance < or <= radius (in elements)."""
    r_int = int(np.ceil(radius_elems))
    dx, dy = np.meshgrid(np.arange(-r_int, r_int + 1), np.arange(-r_int, r_int + 1))
    d2 = dx ** 2 + dy ** 2
    keep = d2 < radius_elems ** 2 if strict else d2 <= radius_elems ** 2
    return np.column_stack([dx[keep], dy[keep]])


def _offset_matrix(nx: int, ny: int, offsets: np.ndarray,
                   values: np.ndarray) -> sp.csr_matrix:
    """Sparse (NE, NE) matrix with entry values[k] linking e to its offset neighbor."""
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    ex, ey = ex.ravel(), ey.ravel()
    rows, cols, data = [], [], []
    for (dx, dy), w in zip(offsets, values):
        jx, jy = ex + dx, ey + dy
        ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
        rows.append((ey[ok] * nx + ex[ok]))
        cols.append((jy[ok] * nx + jx[ok]))
        data.append(np.full(ok.sum(), w))
    m = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nx * ny)).tocsr()
    m.sort_indices()
    return m


class FilterOperator:
    """Cone-weighted density filter with weights max(0, r_min - distance)."""

    def __init__(self, mesh, r_min: float):
        if r_min < mesh.a:
            raise ConfigError(
                f"filter radius {r_min} is below the element size {mesh.a}")
        self.r_min = float(r_min)
        rel = r_min / mesh.a
        offsets = _window_offsets(rel, strict=True)
        dist = np.hypot(offsets[:, 0], offsets[:, 1]) * mesh.a
        weights = r_min - dist  # positive by construction of the window
        self.H = _offset_matrix(mesh.nx, mesh.ny, offsets, weights)
        self.row_sums = np.asarray(self.H.sum(axis=1)).ravel()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Weighted neighborhood average; a convex combination per element."""
        return (self.H @ rho) / self.row_sums

    def backward(self, sens: np.ndarray) -> np.ndarray:
        """Adjoint of apply: out_j = sum_e (F_ej / sum_i F_ei) sens_e."""
        return self.H.T @ (sens / self.row_sums)


def build_filter(mesh, r_min: float) -> FilterOperator:
    return FilterOperator(mesh, r_min)


def apply_filter(f: FilterOperator, rho: np.ndarray) -> np.ndarray:
    return f.apply(rho)


def filter_backward(f: FilterOperator, sens: np.ndarray) -> np.ndarray:
    return f.backward(sens)


def project(rho_tilde: np.ndarray, beta: float) -> np.ndarray:
    """Smooth threshold at 1/2: fixes 0 -> 0, 1/2 -> 1/2, 1 -> 1 exactly."""
    if beta <= 0:
        raise ParameterError(f"projection sharpness must be positive, got {beta}")
    th = np.tanh(0.5 * beta)
    return (th + np.tanh(beta * (np.asarray(rho_tilde) - 0.5))) / (2.0 * th)


def project_deriv(rho_tilde: np.ndarray, beta: float) -> np.ndarray:
    """Slope of the smooth threshold."""
    if beta <= 0:
        raise ParameterError(f"projection sharpness must be positive, got {beta}")
    th = np.tanh(0.5 * beta)
    return beta * (1.0 - np.tanh(beta * (np.asarray(rho_tilde) - 0.5)) ** 2) / (2.0 * th)


class NeighborhoodOperator:
    """Area-weighted mean of a field over the radius-R_e disk around each element.

    On the uniform mesh this is the arithmetic mean over the neighbor set.
    Small meshes use an explicit sorted sparse matrix (bit-exact against an
    index-ordered brute-force sum); large ones fall back to an equivalent
    stencil convolution.
    """

    def __init__(self, mesh, radius: float):
        if radius <= 0:
            raise ConfigError(f"influence radius must be positive, got {radius}")
        self.radius = float(radius)
        self._shape = (mesh.ny, mesh.nx)
        offsets = _window_offsets(radius / mesh.a, strict=False)
        self._use_matrix = offsets.shape[0] * mesh.n_elems <= _MATRIX_NNZ_LIMIT
        if self._use_matrix:
            self.N = _offset_matrix(mesh.nx, mesh.ny, offsets,
                                    np.ones(offsets.shape[0]))
            self.counts = np.asarray(self.N.sum(axis=1)).ravel()
        else:
            r_int = int(np.ceil(radius / mesh.a))
            kernel = np.zeros((2 * r_int + 1, 2 * r_int + 1))
            kernel[offsets[:, 1] + r_int, offsets[:, 0] + r_int] = 1.0
            self._kernel = kernel
            self.counts = self._convolve(np.ones(mesh.n_elems))

    def _convolve(self, field: np.ndarray) -> np.ndarray:
        grid = field.reshape(self._shape)
        out = scipy.ndimage.convolve(grid, self._kernel, mode="constant", cval=0.0)
        return out.ravel()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Local volume fraction per element."""
        if self._use_matrix:
            return (self.N @ rho) / self.counts
        return self._convolve(rho) / self.counts

    def backward(self, sens: np.ndarray) -> np.ndarray:
        """Adjoint of apply (the disk stencil is symmetric)."""
        scaled = sens / self.counts
        if self._use_matrix:
            return self.N.T @ scaled
        return self._convolve(scaled)


def local_volume(nbh: NeighborhoodOperator, rho_proj: np.ndarray) -> np.ndarray:
    return nbh.apply(rho_proj)


def aggregate_max(vbar: np.ndarray, v_loc: float, L: float) -> tuple[float, np.ndarray]:
    """Smoothed constraint max(vbar) - v_loc <= 0 and its gradient wrt vbar."""
    if L <= 0:
        raise ParameterError(f"aggregation constant must be positive, got {L}")
    return ks_aggregate(vbar, L) - v_loc, ks_weights(vbar, L)
