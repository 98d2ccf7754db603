"""Run configuration: a strict flat key = value text file.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Unknown keys, type mismatches and out-of-range values are rejected with the
offending key named.  Unset keys fall back to the chosen problem's
published defaults, and the fully resolved configuration is echoed into the
output directory so a run is reproducible from its artifacts alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .problems import ProblemDefinition, lbeam, mbb, multiload, checkgrad

PROBLEMS = {"lbeam": lbeam, "mbb": mbb, "multiload": multiload,
            "checkgrad": checkgrad}

# keys forwarded into OptimizationParams overrides
_PARAM_KEYS = {
    "r_min": ("r_min_elems", float),
    "R_e": ("R_e_elems", float),
    "t": ("t_elems", float),
    "eps": ("eps_elems", float),
    "eps_floor": ("eps_floor", float),
    "V_c": ("V_c", float),
    "V_loc": ("V_loc", float),
    "gamma": ("gamma", float),
    "L1": ("L1", float),
    "L2": ("L2", float),
    "L_agg": ("L_agg", float),
    "p": ("p", int),
    "beta0": ("beta0", float),
    "beta_max": ("beta_max", float),
    "beta_every": ("beta_every", int),
    "beta_mode": ("beta_mode", str),
    "max_iters": ("max_iters", int),
    "tol": ("tol", float),
    "move_simp": ("move_simp", float),
    "move_mmc": ("move_mmc", float),
}

_MUST_BE_POSITIVE = {"r_min", "R_e", "t", "eps", "V_c", "V_loc", "beta0",
                     "beta_max", "tol", "move_simp", "move_mmc", "scale",
                     "threads", "max_iters", "beta_every", "snapshot_every",
                     "grid_rows", "grid_cols", "p", "cg_tol", "direct_dof_limit"}


@dataclass
class RunConfig:
    problem: str | None = None
    scale: float = 1.0
    out: str | None = None
    threads: int = 1
    snapshot_every: int = 25
    grid_rows: int | None = None
    grid_cols: int | None = None
    cg_tol: float = 1e-8
    direct_dof_limit: int = 300_000
    overrides: dict | None = None   # OptimizationParams overrides

    def __post_init__(self):
        self.overrides = dict(self.overrides or {})


_TOP_KEYS = {
    "problem": str, "scale": float, "out": str, "threads": int,
    "snapshot_every": int, "grid_rows": int, "grid_cols": int,
    "cg_tol": float, "direct_dof_limit": int,
}


def _convert(key: str, raw: str, typ):
    try:
        if typ is int:
            value = int(raw)
        elif typ is float:
            value = float(raw)
        else:
            value = raw
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None
    if key in _MUST_BE_POSITIVE and isinstance(value, (int, float)) and value <= 0:
        raise ConfigError(f"{key} must be positive, got {raw}")
    return value


def parse_config(path) -> RunConfig:
    """Strict parse; every key checked against the documented schema."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in _TOP_KEYS:
            setattr(cfg, key, _convert(key, raw, _TOP_KEYS[key]))
        elif key in _PARAM_KEYS:
            name, typ = _PARAM_KEYS[key]
            cfg.overrides[name] = _convert(key, raw, typ)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    if cfg.problem is not None and cfg.problem not in PROBLEMS:
        raise ConfigError(
            f"unknown problem {cfg.problem!r}; choose from {sorted(PROBLEMS)}")
    return cfg


def build_problem(cfg: RunConfig) -> ProblemDefinition:
    """Instantiate the configured problem with its overrides applied."""
    if cfg.problem is None:
        raise ConfigError("no problem selected (config key 'problem' or --problem)")
    builder = PROBLEMS[cfg.problem]
    kwargs = dict(cfg.overrides)
    if cfg.problem != "checkgrad":
        kwargs["scale"] = cfg.scale
        if cfg.grid_rows is not None and cfg.grid_cols is not None:
            kwargs["component_grid"] = (cfg.grid_rows, cfg.grid_cols)
    return builder(**kwargs)


def echo_config(cfg: RunConfig, problem: ProblemDefinition, path) -> None:
    """Write the fully resolved configuration (round-trips through parse_config)."""
    p = problem.params
    lines = [
        f"problem = {problem.name}",
        f"scale = {cfg.scale!r}",
        f"threads = {cfg.threads}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"grid_rows = {problem.component_grid[0]}",
        f"grid_cols = {problem.component_grid[1]}",
        f"cg_tol = {cfg.cg_tol!r}",
        f"direct_dof_limit = {cfg.direct_dof_limit}",
        f"r_min = {p.r_min_elems!r}",
        f"R_e = {p.R_e_elems!r}",
        f"t = {p.t_elems!r}",
        f"eps = {p.eps_elems!r}",
        f"eps_floor = {p.eps_floor!r}",
        f"V_c = {p.V_c!r}",
        f"V_loc = {p.V_loc!r}",
        f"gamma = {p.gamma!r}",
        f"L1 = {p.L1!r}",
        f"L2 = {p.L2!r}",
        f"L_agg = {p.L_agg!r}",
        f"p = {p.p}",
        f"beta0 = {p.beta0!r}",
        f"beta_max = {p.beta_max!r}",
        f"beta_every = {p.beta_every}",
        f"beta_mode = {p.beta_mode}",
        f"max_iters = {p.max_iters}",
        f"tol = {p.tol!r}",
        f"move_simp = {p.move_simp!r}",
        f"move_mmc = {p.move_mmc!r}",
    ]
    if cfg.out is not None:
        lines.insert(1, f"out = {cfg.out}")
    Path(path).write_text("\n".join(lines) + "\n")
