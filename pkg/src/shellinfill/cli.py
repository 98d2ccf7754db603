"""Command-line interface: run optimizations, verify gradients, re-render dumps.

Exit codes: 0 success, 1 failed gradient check, 2 configuration error,
3 finite-element analysis failure, 4 non-finite objective.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_problem, echo_config, parse_config
from .driver import RunOptions, run
from .errors import AnalysisError, ConfigError, NonFiniteObjective
from .mesh import StructuredMesh
from .output import RunSink, read_density_dump, write_density_raster, write_history
from .problems import checkgrad, checkgrad_design

log = logging.getLogger("shellinfill")

THREADS_ENV = "SHELLINFILL_THREADS"


def _thread_limit(n: int):
    try:
        from threadpoolctl import threadpool_limits
        return threadpool_limits(limits=n)
    except ImportError:  # best effort without threadpoolctl
        os.environ.setdefault("OMP_NUM_THREADS", str(n))
        return contextlib.nullcontext()


def _resolve_threads(cli_threads: int | None, cfg: RunConfig) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if n <= 0:
            raise ConfigError(f"{THREADS_ENV} must be positive, got {env}")
        return n
    if cli_threads is not None:
        return cli_threads
    return cfg.threads


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if getattr(args, "problem", None):
        cfg.problem = args.problem
    if getattr(args, "scale", None) is not None:
        if args.scale <= 0:
            raise ConfigError("scale must be positive")
        cfg.scale = args.scale
    if getattr(args, "max_iters", None) is not None:
        if args.max_iters <= 0:
            raise ConfigError("max-iters must be positive")
        cfg.overrides["max_iters"] = args.max_iters
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    if cfg.out is None:
        raise ConfigError("no output directory (config key 'out' or --out)")
    problem = build_problem(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, problem, out_dir / "config.txt")

    threads = _resolve_threads(args.threads, cfg)
    options = RunOptions(snapshot_every=cfg.snapshot_every,
                         direct_dof_limit=cfg.direct_dof_limit,
                         cg_rtol=cfg.cg_tol)
    sink = RunSink(out_dir, problem)
    log.info("problem %s: %dx%d elements, %d components initially, out=%s",
             problem.name, problem.mesh.nx, problem.mesh.ny,
             2 * problem.component_grid[0] * problem.component_grid[1], out_dir)
    with _thread_limit(threads):
        result = run(problem, options=options, sink=sink)
    log.info("finished after %d iterations (converged=%s): "
             "C~ %.6g, g1 %.3e, g2 %.3e",
             result.iterations, result.converged,
             result.state.Ctilde, result.state.g1, result.state.g2)
    return 0


def _cmd_check_grad(args) -> int:
    from .forward import ForwardModel
    from .sensitivity import fd_oracle, fd_steps, grad_bundle

    problem = checkgrad()
    x = checkgrad_design(problem)
    nc = problem.n_components_of(x)
    model = ForwardModel(problem)
    state = model.forward(x, beta=1.0)
    bundle = grad_bundle(model, state)
    steps = fd_steps(problem, nc)
    analytic = {"Ctilde": bundle.dCtilde, "g1": bundle.dg1, "g2": bundle.dg2}

    worst = 0.0
    failures = 0
    indices = range(x.size) if args.all else _spot_indices(x.size, nc)
    for name, grad in analytic.items():
        for idx in indices:
            fd = fd_oracle(problem, x, idx, steps[idx], name, model=model)
            err, ok = _grad_error(grad[idx], fd)
            worst = max(worst, err)
            failures += not ok
            if args.verbose or not ok:
                kind = "mmc" if idx < 6 * nc else "simp"
                print(f"{name:6s} {kind}[{idx:4d}]  analytic {grad[idx]:+.6e}  "
                      f"fd {fd:+.6e}  err {err:.2e}  {'ok' if ok else 'FAIL'}")
    print(f"check-grad: {failures} failures, worst error {worst:.3e} "
          f"({'PASS' if failures == 0 else 'FAIL'})")
    return 0 if failures == 0 else 1


def _grad_error(analytic: float, fd: float) -> tuple[float, bool]:
    if max(abs(analytic), abs(fd)) <= 1e-8:
        return abs(analytic - fd), abs(analytic - fd) < 1e-8
    err = abs(analytic - fd) / max(abs(analytic), abs(fd))
    return err, err < 1e-3


def _spot_indices(n: int, nc: int):
    """All geometry variables plus a deterministic spread of infill ones."""
    mmc = list(range(6 * nc))
    simp = list(range(6 * nc, n, max(1, (n - 6 * nc) // 24)))
    return mmc + simp


def _cmd_render(args) -> int:
    rho = read_density_dump(args.input)
    if rho.size != args.nx * args.ny:
        raise ConfigError(
            f"dump has {rho.size} values, expected nx*ny = {args.nx * args.ny}")
    if np.any((rho < 0) | (rho > 1)):
        raise ConfigError("densities must lie in [0, 1]")
    mesh = StructuredMesh(args.nx, args.ny, 1.0)
    write_density_raster(rho, mesh, args.output)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shellinfill",
        description="Shell-infill topology optimization (components + porous infill)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full optimization")
    p_run.add_argument("--config", help="path to a key = value config file")
    p_run.add_argument("--problem", choices=["lbeam", "mbb", "multiload"],
                       help="benchmark to run (overrides the config)")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--scale", type=float, default=None,
                       help="resolution multiplier")
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_chk = sub.add_parser("check-grad",
                           help="finite-difference gradient suite on a small instance")
    p_chk.add_argument("--all", action="store_true",
                       help="check every design variable (slower)")
    p_chk.add_argument("--verbose", action="store_true")
    p_chk.set_defaults(func=_cmd_check_grad)

    p_ren = sub.add_parser("render", help="re-render a saved density dump")
    p_ren.add_argument("input", help="density dump (one value per line)")
    p_ren.add_argument("--nx", type=int, required=True)
    p_ren.add_argument("--ny", type=int, required=True)
    p_ren.add_argument("--output", required=True, help="output .pgm path")
    p_ren.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except AnalysisError as exc:
        print(f"analysis failure: {exc}", file=sys.stderr)
        return 3
    except NonFiniteObjective as exc:
        print(f"non-finite objective: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
