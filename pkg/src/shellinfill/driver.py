"""The optimization loop: forward pass, gradients, MMA step, continuation.

Design variables are normalized to [0, 1] for the optimizer (asymptote
heuristics assume comparable scales; lengths and radians do not mix well
unnormalized), and the objective handed to MMA is scaled to ~10 at the first
iterate.  The loop itself is deterministic: no randomness anywhere, and all
reductions run in fixed order.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteObjective
from .forward import ForwardModel, ForwardState
from .mesh import CG_RTOL, DIRECT_DOF_LIMIT
from .mma import MmaOptimizer
from .problems import ProblemDefinition, initial_design
from .sensitivity import grad_bundle

log = logging.getLogger("shellinfill")


@dataclass
class IterationRecord:
    """One history row; wall_time is the measured seconds for the iteration."""

    iteration: int
    Ctilde: float
    C: float
    CM: float
    g1: float
    g2: float
    max_rel_change: float
    beta: float
    wall_time: float


@dataclass
class RunOptions:
    max_iters: int | None = None        # default: problem.params.max_iters
    tol: float | None = None            # default: problem.params.tol
    snapshot_every: int = 25
    direct_dof_limit: int = DIRECT_DOF_LIMIT
    cg_rtol: float = CG_RTOL
    stagnation_window: int = 25         # "stagnation" beta mode parameters
    stagnation_tol: float = 1e-4


@dataclass
class RunResult:
    x: np.ndarray
    records: list[IterationRecord]
    state: ForwardState               # forward pass at the final design
    converged: bool
    iterations: int = field(init=False)

    def __post_init__(self):
        self.iterations = len(self.records)


class _BetaSchedule:
    """Projection-sharpness continuation: fixed doubling or g2 stagnation."""

    def __init__(self, params, window: int, stag_tol: float):
        self.beta = params.beta0
        self.beta_max = params.beta_max
        self.every = params.beta_every
        self.mode = params.beta_mode
        self.window = window
        self.stag_tol = stag_tol
        self._g2_history: list[float] = []

    def value(self, iteration: int) -> float:
        if self.mode == "fixed":
            doublings = (iteration - 1) // self.every
            return min(self.beta * 2.0 ** doublings, self.beta_max)
        return self.beta

    def observe(self, g2: float):
        if self.mode != "stagnation" or self.beta >= self.beta_max:
            return
        self._g2_history.append(g2)
        if len(self._g2_history) >= self.window:
            tail = self._g2_history[-self.window:]
            if max(tail) - min(tail) < self.stag_tol:
                self.beta = min(2.0 * self.beta, self.beta_max)
                self._g2_history.clear()


def run(problem: ProblemDefinition, x0: np.ndarray | None = None,
        options: RunOptions | None = None, sink=None) -> RunResult:
    """Optimize until the design stalls or the iteration cap is reached.

    sink, if given, receives snapshot(iteration, x, state) calls every
    options.snapshot_every iterations and finish(x, state, records) at the
    end (see the output module).
    """
    opts = options or RunOptions()
    x = np.array(initial_design(problem) if x0 is None else x0, dtype=float)
    max_iters = opts.max_iters or problem.params.max_iters
    tol = opts.tol if opts.tol is not None else problem.params.tol

    model = ForwardModel(problem, opts.direct_dof_limit, opts.cg_rtol)
    nc = problem.n_components_of(x)
    lo, hi = problem.bounds(nc)
    rng = hi - lo
    xn = np.clip((x - lo) / rng, 0.0, 1.0)

    mma = MmaOptimizer(np.zeros(xn.size), np.ones(xn.size),
                       n_constraints=2, move=problem.move_limits(nc))
    schedule = _BetaSchedule(problem.params, opts.stagnation_window,
                             opts.stagnation_tol)
    records: list[IterationRecord] = []
    obj_scale = 1.0
    converged = False
    state = None

    for it in range(1, max_iters + 1):
        tic = time.perf_counter()
        beta = schedule.value(it)
        state = model.forward(lo + xn * rng, beta)
        if not np.isfinite([state.Ctilde, state.g1, state.g2]).all():
            if sink is not None:
                sink.abort(it, lo + xn * rng, state)
            raise NonFiniteObjective(
                f"iteration {it}: objective {state.Ctilde}, "
                f"g1 {state.g1}, g2 {state.g2}")
        if it == 1:
            obj_scale = 10.0 / max(abs(state.Ctilde), 1e-12)
        bundle = grad_bundle(model, state)

        xn_next = mma.update(
            xn, obj_scale * state.Ctilde, obj_scale * bundle.dCtilde * rng,
            np.array([state.g1, state.g2]),
            np.vstack([bundle.dg1 * rng, bundle.dg2 * rng]))
        change = float(np.abs(xn_next - xn).max())
        schedule.observe(state.g2)

        records.append(IterationRecord(
            iteration=it, Ctilde=state.Ctilde, C=state.C, CM=state.CM,
            g1=state.g1, g2=state.g2, max_rel_change=change, beta=beta,
            wall_time=time.perf_counter() - tic))
        log.info("it %4d  beta %5.1f  C~ %12.5g  C %12.5g  g1 %+9.2e  "
                 "g2 %+9.2e  dx %8.2e  %.2fs", it, beta, state.Ctilde,
                 state.C, state.g1, state.g2, change, records[-1].wall_time)
        if sink is not None and (it % opts.snapshot_every == 0):
            sink.snapshot(it, lo + xn * rng, state)

        xn = xn_next
        if change < tol:
            converged = True
            break

    x_final = lo + xn * rng
    final_state = model.forward(x_final, records[-1].beta)
    result = RunResult(x=x_final, records=records, state=final_state,
                       converged=converged)
    if sink is not None:
        sink.finish(x_final, final_state, records)
    return result
