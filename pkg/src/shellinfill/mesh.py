"""Structured Q4 plane-stress finite elements: stiffness, assembly, solve.

The mesh is a uniform grid of square four-node elements with unit thickness.
Element e = iy*nx + ix has its nodes ordered counter-clockwise from the
bottom-left corner; node n = iy*(nx+1) + ix carries DOFs (2n, 2n+1) for the
(x, y) displacements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AnalysisError, ParameterError

# Direct sparse factorization below this many free DOFs; preconditioned CG above.
DIRECT_DOF_LIMIT = 300_000
CG_RTOL = 1e-8

_GAUSS = 1.0 / np.sqrt(3.0)
# local corner coordinates, counter-clockwise from bottom-left
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


@dataclass(frozen=True)
class MaterialModel:
    """Isotropic plane-stress material with SIMP penalization."""

    E_s: float = 1.0
    nu_s: float = 0.3
    n: float = 3.0          # stiffness penalty exponent
    rho_min: float = 1e-3   # ghost-stiffness floor, keeps K nonsingular

    def __post_init__(self):
        if self.E_s <= 0 or not (-1.0 < self.nu_s < 0.5):
            raise ParameterError(
                f"invalid material: E={self.E_s}, nu={self.nu_s}")
        if self.n < 1:
            raise ParameterError(f"penalty exponent must be >= 1, got {self.n}")
        if not (0.0 < self.rho_min < 1.0):
            raise ParameterError(f"density floor must be in (0,1), got {self.rho_min}")


@dataclass(frozen=True)
class LoadCase:
    """One global load vector plus the (shared) constrained DOF set."""

    f: np.ndarray
    fixed_dofs: np.ndarray
    label: str = "case"

    def __post_init__(self):
        if self.fixed_dofs.size == 0:
            raise ParameterError(f"{self.label}: no supports given")
        if np.any(self.f[self.fixed_dofs] != 0.0):
            raise ParameterError(f"{self.label}: load applied on a fixed DOF")


class StructuredMesh:
    """Uniform nx-by-ny grid of square Q4 elements with edge length a."""

    def __init__(self, nx: int, ny: int, a: float):
        if nx < 1 or ny < 1 or a <= 0:
            raise ParameterError(f"invalid mesh: nx={nx}, ny={ny}, a={a}")
        self.nx = int(nx)
        self.ny = int(ny)
        self.a = float(a)
        self.n_elems = self.nx * self.ny
        self.n_nodes = (self.nx + 1) * (self.ny + 1)
        self.n_dofs = 2 * self.n_nodes

        ix, iy = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1))
        self.node_coords = np.column_stack([ix.ravel() * a, iy.ravel() * a])

        ex, ey = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        ex, ey = ex.ravel(), ey.ravel()
        bl = ey * (self.nx + 1) + ex
        # counter-clockwise: bottom-left, bottom-right, top-right, top-left
        self.elem_nodes = np.column_stack(
            [bl, bl + 1, bl + self.nx + 2, bl + self.nx + 1]).astype(np.int64)
        self.elem_dofs = np.repeat(2 * self.elem_nodes, 2, axis=1)
        self.elem_dofs[:, 1::2] += 1
        self.elem_centers = np.column_stack(
            [(ex + 0.5) * a, (ey + 0.5) * a])

    def node_index(self, ix: int, iy: int) -> int:
        return iy * (self.nx + 1) + ix

    def elem_index(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix

    def dof_index(self, ix: int, iy: int, direction: int) -> int:
        return 2 * self.node_index(ix, iy) + direction


def element_stiffness_q4(E: float, nu: float, a: float) -> np.ndarray:
    """8x8 stiffness of a square Q4 plane-stress element (2x2 Gauss points).

    For a square element with unit thickness the result is independent of the
    edge length a.
    """
    if E <= 0 or not (-1.0 < nu < 0.5) or a <= 0:
        raise ParameterError(f"invalid element parameters: E={E}, nu={nu}, a={a}")
    D = (E / (1.0 - nu * nu)) * np.array(
        [[1.0, nu, 0.0],
         [nu, 1.0, 0.0],
         [0.0, 0.0, (1.0 - nu) / 2.0]])
    k = np.zeros((8, 8))
    jac = a / 2.0  # dx/dxi for the square element
    for gx in (-_GAUSS, _GAUSS):
        for gy in (-_GAUSS, _GAUSS):
            dN_dxi = 0.25 * _XI * (1.0 + gy * _ETA)
            dN_deta = 0.25 * _ETA * (1.0 + gx * _XI)
            dN_dx = dN_dxi / jac
            dN_dy = dN_deta / jac
            B = np.zeros((3, 8))
            B[0, 0::2] = dN_dx
            B[1, 1::2] = dN_dy
            B[2, 0::2] = dN_dy
            B[2, 1::2] = dN_dx
            k += B.T @ D @ B * jac * jac
    return k


def stiffness_scale(rho: np.ndarray, mat: MaterialModel) -> np.ndarray:
    """Per-element multiplier of the solid stiffness: rho_min + rho^n (1 - rho_min)."""
    return mat.rho_min + np.clip(rho, 0.0, 1.0) ** mat.n * (1.0 - mat.rho_min)


def assemble(mesh: StructuredMesh, rho: np.ndarray, mat: MaterialModel) -> sp.csc_matrix:
    """Assemble the global stiffness with penalized element densities.

    Each element contributes k_min + rho^n (k^S - k_min) where
    k_min = rho_min * k^S, i.e. (rho_min + rho^n (1 - rho_min)) * k^S.
    """
    ks = element_stiffness_q4(mat.E_s, mat.nu_s, mesh.a)
    scale = stiffness_scale(rho, mat)
    data = (scale[:, None] * ks.ravel()[None, :]).ravel()
    rows = np.repeat(mesh.elem_dofs, 8, axis=1).ravel()
    cols = np.tile(mesh.elem_dofs, (1, 8)).ravel()
    K = sp.coo_matrix((data, (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs))
    return K.tocsc()


class _Factorization:
    """Reduced-system solver reusable across right-hand sides."""

    def __init__(self, K: sp.csc_matrix, fixed_dofs: np.ndarray,
                 direct_dof_limit: int = DIRECT_DOF_LIMIT, cg_rtol: float = CG_RTOL):
        n = K.shape[0]
        self.free = np.setdiff1d(np.arange(n), fixed_dofs)
        self.n = n
        self.cg_rtol = cg_rtol
        self.K_rr = K[self.free][:, self.free].tocsc()
        self.direct = self.free.size <= direct_dof_limit
        if self.direct:
            self.lu = spla.splu(self.K_rr)
        else:
            # incomplete factorization preconditioner for CG on large meshes
            ilu = spla.spilu(self.K_rr, drop_tol=1e-5, fill_factor=12)
            self.M = spla.LinearOperator(self.K_rr.shape, ilu.solve)

    def solve(self, f: np.ndarray, label: str = "case") -> np.ndarray:
        fr = f[self.free]
        if self.direct:
            ur = self.lu.solve(fr)
        else:
            ur, info = spla.cg(self.K_rr, fr, rtol=self.cg_rtol, maxiter=20000, M=self.M)
            if info != 0:
                raise AnalysisError(f"{label}: CG failed to converge (info={info})")
        if not np.all(np.isfinite(ur)):
            raise AnalysisError(
                f"{label}: singular or indefinite system (insufficient supports?)")
        fnorm = np.linalg.norm(fr)
        if fnorm > 0.0:
            res = np.linalg.norm(self.K_rr @ ur - fr) / fnorm
            if res > 1e-8:
                raise AnalysisError(f"{label}: solver residual {res:.2e} exceeds 1e-8")
        u = np.zeros(self.n)
        u[self.free] = ur
        return u


def factorize(K: sp.csc_matrix, fixed_dofs: np.ndarray,
              direct_dof_limit: int = DIRECT_DOF_LIMIT,
              cg_rtol: float = CG_RTOL) -> _Factorization:
    """Eliminate the fixed DOFs and prepare a reusable reduced-system solver."""
    return _Factorization(K, fixed_dofs, direct_dof_limit, cg_rtol)


def solve(K: sp.csc_matrix, case: LoadCase, **kwargs) -> np.ndarray:
    """Displacements for one load case (u = 0 on fixed DOFs)."""
    return factorize(K, case.fixed_dofs, **kwargs).solve(case.f, case.label)


def compliance(K: sp.csc_matrix, u: np.ndarray) -> float:
    """u^T K u, the work of the external loads."""
    return float(u @ (K @ u))


def element_strain_energy(mesh: StructuredMesh, u: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Per-element quadratic form u_e^T ks u_e (ks is the unit-density matrix)."""
    ue = u[mesh.elem_dofs]
    return np.einsum("ij,jk,ik->i", ue, ks, ue)


def dump_stiffness(K: sp.spmatrix, path) -> None:
    """Debug dump of K in Matrix Market coordinate text format."""
    scipy.io.mmwrite(str(path), K.tocoo())
