"""Run artifacts: density rasters, component tables, history and design dumps.

Rasters are 8-bit binary portable graymaps (P5), one pixel per element,
solid drawn black: pixel = round_half_up(255 * (1 - density)).  Row order is
top-to-bottom, matching the physical domain.  Every raster gets a companion
plain-text dump (one density per line, 9 significant digits) for lossless
diffing and re-rendering.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import ComponentSet

HISTORY_HEADER = "iter,Ctilde,C,CM,g1,g2,max_rel_change,beta,wall_time"


def density_to_pixels(rho: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """(ny, nx) uint8 image, top row first; round-half-up quantization."""
    grid = np.asarray(rho, dtype=float).reshape(ny, nx)
    pixels = np.floor(255.0 * (1.0 - grid) + 0.5)
    return np.clip(pixels, 0, 255).astype(np.uint8)[::-1, :]


def write_density_raster(rho: np.ndarray, mesh, path) -> None:
    """P5 graymap plus the .txt companion dump next to it."""
    path = Path(path)
    pixels = density_to_pixels(rho, mesh.nx, mesh.ny)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mesh.nx} {mesh.ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    write_density_dump(rho, path.with_suffix(".txt"))


def write_density_dump(rho: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for value in np.asarray(rho, dtype=float):
            fh.write(f"{value:.8e}\n")


def read_density_dump(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


def write_component_table(cset: ComponentSet, iteration: int, path) -> None:
    """One row per component: x0 y0 a t1 t2 theta, six decimals."""
    with open(path, "w") as fh:
        fh.write(f"# iteration {iteration}\n")
        for c in cset.components:
            fh.write(f"{c.x0:.6f} {c.y0:.6f} {c.a:.6f} "
                     f"{c.t1:.6f} {c.t2:.6f} {c.theta:.6f}\n")


def write_history(records, path) -> None:
    """CSV history, fixed precision.

    The wall_time column is written as zero so that identical runs produce
    byte-identical files; measured timings go to the run log instead.
    """
    if not records:
        raise ValueError("history must contain at least one record")
    with open(path, "w") as fh:
        fh.write(HISTORY_HEADER + "\n")
        for r in records:
            fh.write(f"{r.iteration},{r.Ctilde:.10e},{r.C:.10e},{r.CM:.10e},"
                     f"{r.g1:.10e},{r.g2:.10e},{r.max_rel_change:.10e},"
                     f"{r.beta:.10e},{0.0:.10e}\n")


def write_design_vector(x: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(x, dtype=float), fmt="%.17e")


def read_design_vector(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


class RunSink:
    """Directory writer handed to driver.run for snapshots and final artifacts."""

    def __init__(self, out_dir, problem):
        self.dir = Path(out_dir)
        self.problem = problem
        self.snap_dir = self.dir / "snapshots"
        self.snap_dir.mkdir(parents=True, exist_ok=True)

    def snapshot(self, iteration: int, x: np.ndarray, state) -> None:
        tag = f"{iteration:06d}"
        write_density_raster(state.rho, self.problem.mesh,
                             self.snap_dir / f"density_{tag}.pgm")
        write_component_table(state.outer, iteration,
                              self.snap_dir / f"components_{tag}.txt")
        write_design_vector(x, self.snap_dir / f"design_{tag}.txt")

    def finish(self, x: np.ndarray, state, records) -> None:
        final = self.dir / "final"
        final.mkdir(parents=True, exist_ok=True)
        mesh = self.problem.mesh
        write_density_raster(state.rho, mesh, final / "density.pgm")
        write_density_raster(state.rho_outer, mesh, final / "outer.pgm")
        write_density_raster(state.rho_inner, mesh, final / "inner.pgm")
        write_density_raster(state.rho_proj, mesh, final / "infill.pgm")
        write_component_table(state.outer, len(records), final / "components.txt")
        write_design_vector(x, final / "design.txt")
        write_history(records, self.dir / "history.csv")

    def abort(self, iteration: int, x: np.ndarray, state) -> None:
        """Diagnostic dump of the last design after a non-finite objective."""
        write_design_vector(x, self.dir / "aborted_design.txt")
