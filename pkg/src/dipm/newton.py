"""Outer Newton loop with distributed direction, decrement, and line search.

Each outer iteration linearizes the stage objectives at the current
iterates, computes the Newton direction with the splitting solver (warm
started from the previous direction), and terminates once every agent's
local curvature form satisfies its share of the decrement test. Otherwise
every agent backtracks on its own objective, the smallest step wins by
min-consensus, and all agents move by that common step. Because every
update adds a common multiple of slices of one global vector, iterates
started consistent stay consistent to the last bit.

Per-agent work (prox solves, decrements, backtracking) depends only on
agent-local state and could run concurrently; the consensus calls are the
only barriers. The driver itself owns its state for the duration of a
solve, and all reductions run in ascending agent order so repeated runs
are bit-identical.
"""

from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .direction import DirectionWorkspace, compute_direction
from .errors import (
    DecrementError,
    DirectionConvergenceError,
    DisconnectedNetworkError,
    InfeasibleStartError,
    IterationCapError,
    LineSearchError,
    StructureError,
)
from .network import RoundScheduler, all_agree, min_consensus
from .problem import build_coupling, consistency_error, merge_slices, scatter
from .trace import TraceRow


@dataclass(frozen=True)
class StageBlock:
    """What one agent minimizes during one stage.

    ``h`` is the stage objective (the block objective itself for plain
    Newton, its barrier transform during interior-point stages); ``f_true``
    is the untransformed objective used for reporting. ``inequality`` holds
    the constraints whose strict feasibility the line search must preserve.
    """

    index_set: tuple
    h: object
    f_true: object
    inequality: tuple = ()
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None


def plain_stage(problem):
    """Stage blocks minimizing the block objectives directly.

    Only inequality-free problems can be solved this way; anything with
    inequality constraints needs the interior-point driver.
    """
    if problem.m_total:
        raise StructureError(
            "problem has inequality constraints; solve it with the interior-point mode"
        )
    return [
        StageBlock(
            index_set=blk.index_set,
            h=blk.objective,
            f_true=blk.objective,
            inequality=(),
            A_eq=blk.A_eq,
            b_eq=blk.b_eq,
        )
        for blk in problem.blocks
    ]


@dataclass
class LineSearchParams:
    armijo_a: float = 0.2
    shrink_b: float = 0.5
    max_backtracks: int = 60
    # keep at least this fraction of every constraint gap per step; the log
    # barrier is finite arbitrarily close to the boundary while its curvature
    # overflows, so bare strict feasibility is not a usable acceptance rule
    boundary_fraction: float = 0.01

    def __post_init__(self):
        if not 0 < self.armijo_a < 0.5:
            raise ValueError("armijo_a must lie in (0, 0.5)")
        if not 0 < self.shrink_b < 1:
            raise ValueError("shrink_b must lie in (0, 1)")
        if not 0 < self.boundary_fraction < 1:
            raise ValueError("boundary_fraction must lie in (0, 1)")


def local_decrement(agent, ds):
    """Curvature form ds' H ds of one agent; its local decrement squared.

    Tiny negative values (inexact directions meeting a semidefinite
    Hessian) are clamped to zero; anything below -1e-12 signals corrupted
    data and raises.
    """
    val = float(ds @ agent.hess @ ds)
    if val < -1e-12:
        raise DecrementError(f"local decrement {val:.3e} is significantly negative")
    return max(val, 0.0)


def agent_step_size(stage_block, s, ds, grad_dot, params):
    """Backtrack on one agent's own stage objective.

    Strict feasibility of the inequalities is restored first (the stage
    objective is undefined outside their region), then the Armijo test is
    applied on the true stage objective. A direction that improves the sum
    may ascend along an individual agent's slice (grad_dot >= 0); such an
    agent cannot satisfy any local decrease test, so only feasibility binds
    it and the descending agents govern the step through the later min
    reduction. Returns the accepted step, or None once the budget is spent.
    """
    alpha = 1.0
    h0 = stage_block.h.value(s)
    descending = grad_dot < 0.0
    gap_floor = [params.boundary_fraction * g.value(s) for g in stage_block.inequality]
    # resolution of the objective value itself; the acceptable decrease near
    # a stiff stage center can be smaller than one rounding step of h0
    noise = 8.0 * np.finfo(float).eps * (1.0 + abs(h0))
    for _ in range(params.max_backtracks + 1):
        cand = s + alpha * ds
        feasible = all(
            g.value(cand) <= floor
            for g, floor in zip(stage_block.inequality, gap_floor)
        )
        if feasible:
            if not descending:
                return alpha
            if stage_block.h.value(cand) <= h0 + params.armijo_a * alpha * grad_dot + noise:
                return alpha
        alpha *= params.shrink_b
    return None


def distributed_line_search(stage, points, workspace, ds_slices, params, scheduler):
    """Per-agent backtracking followed by min-consensus on the step size."""
    alphas = []
    for i, blk in enumerate(stage):
        grad_dot = float(workspace.agents[i].grad @ ds_slices[i])
        alpha = agent_step_size(blk, points[i], ds_slices[i], grad_dot, params)
        if alpha is None:
            raise LineSearchError(
                f"agent {i} exhausted {params.max_backtracks} backtracks", agent=i
            )
        alphas.append(alpha)
    alpha, _ = min_consensus(scheduler, alphas)
    return alpha


@dataclass
class NewtonResult:
    s_slices: list
    x: np.ndarray
    outer_iterations: int
    converged: bool
    decrement_half: float
    decrement_half_max_agent: float
    e_c: float
    inner_iterations: list
    max_consistency_error: float
    max_dual_average: float
    max_eq_violation: float
    descent_violations: int
    rows: list


def _stage_objectives(stage, points):
    obj_h = 0.0
    obj_f = 0.0
    for blk, s in zip(stage, points):
        obj_h += blk.h.value(s)
        obj_f += blk.f_true.value(s)
    return obj_h, obj_f


def _check_stage_start(stage, points, eq_atol):
    violations = []
    for i, blk in enumerate(stage):
        for c, g in enumerate(blk.inequality):
            val = g.value(points[i])
            if not val < 0.0:
                violations.append(f"agent {i} inequality {c}: value {val:.6e} not < 0")
        if blk.A_eq is not None:
            resid = float(np.abs(blk.A_eq @ points[i] - blk.b_eq).max(initial=0.0))
            if resid > eq_atol:
                violations.append(f"agent {i} equality residual {resid:.3e} exceeds {eq_atol:g}")
    if violations:
        raise InfeasibleStartError("starting point is infeasible", violations)


def newton_solve(stage, s0_slices, config, coupling, scheduler,
                 stage_index=0, t=1.0, e_c=0.0, rows=None, rho=None, eq_atol=1e-8):
    """Run the distributed Newton iteration on one stage.

    ``s0_slices`` must be consistent (slices of one global vector) and
    feasible for the stage's constraints. Trace rows are appended to
    ``rows`` when given; the terminal iteration is recorded with alpha 0.
    ``rho`` overrides the configured penalty for this stage (the barrier
    driver scales it with the stage parameter so the inner iteration count
    stays independent of how stiff the stage objective is); it is constant
    within the stage, so every direction computation still factors each
    agent's system exactly once. Steps along the averaged direction leave
    each agent's equality system satisfied only to the inner primal
    tolerance, so a stage entered from a previous stage inherits that
    drift; ``eq_atol`` is the entry gate for it.
    """
    n_agents = coupling.n_agents
    if n_agents > 1 and not scheduler.is_connected:
        raise DisconnectedNetworkError(
            "coupling graph is disconnected; split the problem and solve the pieces"
        )
    points = [np.array(s, dtype=float) for s in s0_slices]
    if consistency_error(points, coupling) > 1e-12:
        raise InfeasibleStartError(
            "starting slices are not consistent (not slices of one global vector)"
        )
    _check_stage_start(stage, points, eq_atol)

    params = LineSearchParams(config.armijo_a, config.shrink_b, config.max_backtracks)
    rows_out = rows if rows is not None else []
    prev_dx = np.zeros(coupling.n)
    inner_counts = []
    max_cons = consistency_error(points, coupling)
    max_dual_avg = 0.0
    max_eq_viol = 0.0
    descent_violations = 0

    for outer in range(config.newton_max_iter):
        sent_before = scheduler.total_sent
        workspace = DirectionWorkspace(stage, points, coupling, config, rho=rho)
        res = compute_direction(
            workspace, scheduler, dz0=prev_dx if config.warm_start else None
        )
        inner_counts.append(res.iterations)
        max_dual_avg = max(max_dual_avg, res.max_dual_average)
        max_eq_viol = max(max_eq_viol, res.max_eq_violation)
        if not res.converged and not config.accept_unconverged_direction:
            raise DirectionConvergenceError(
                f"direction iteration cap {workspace.max_iter} reached "
                f"(primal {res.primal_residual:.3e}, dual {res.dual_residual:.3e})",
                primal_residual=res.primal_residual,
                dual_residual=res.dual_residual,
            )

        decs = [local_decrement(a, d) for a, d in zip(workspace.agents, res.ds_slices)]
        dec_half = sum(decs) / 2.0
        dec_half_max = max(decs) / 2.0
        flags = [d / 2.0 <= config.eps_nt / n_agents for d in decs]
        done, _ = all_agree(scheduler, flags)

        obj_h, obj_f = _stage_objectives(stage, points)

        if done:
            rows_out.append(TraceRow(
                stage=stage_index, t=t, outer=outer,
                inner_iterations=res.iterations, decrement_half=dec_half,
                alpha=0.0, max_primal_residual=res.primal_residual,
                max_dual_residual=res.dual_residual, objective_h=obj_h,
                objective_f=obj_f, messages=scheduler.total_sent - sent_before,
                e_c_bound=e_c,
            ))
            return NewtonResult(
                s_slices=points, x=merge_slices(points, coupling),
                outer_iterations=outer, converged=True, decrement_half=dec_half,
                decrement_half_max_agent=dec_half_max, e_c=e_c,
                inner_iterations=inner_counts, max_consistency_error=max_cons,
                max_dual_average=max_dual_avg, max_eq_violation=max_eq_viol,
                descent_violations=descent_violations, rows=rows_out,
            )

        alpha = distributed_line_search(
            stage, points, workspace, res.ds_slices, params, scheduler
        )
        points = [s + alpha * d for s, d in zip(points, res.ds_slices)]
        e_c += alpha * alpha * config.eps_pri
        prev_dx = res.dx
        max_cons = max(max_cons, consistency_error(points, coupling))
        new_h, _ = _stage_objectives(stage, points)
        if new_h > obj_h:
            descent_violations += 1

        rows_out.append(TraceRow(
            stage=stage_index, t=t, outer=outer,
            inner_iterations=res.iterations, decrement_half=dec_half,
            alpha=alpha, max_primal_residual=res.primal_residual,
            max_dual_residual=res.dual_residual, objective_h=obj_h,
            objective_f=obj_f, messages=scheduler.total_sent - sent_before,
            e_c_bound=e_c,
        ))

    raise IterationCapError(
        f"Newton iteration cap {config.newton_max_iter} reached"
    )


def solve_newton(problem, x0, config=None):
    """Convenience driver: coupling, scheduler, and plain stage in one call."""
    config = config or SolverConfig()
    coupling = build_coupling(problem)
    scheduler = RoundScheduler(coupling)
    stage = plain_stage(problem)
    s0 = scatter(np.asarray(x0, dtype=float), coupling)
    result = newton_solve(stage, s0, config, coupling, scheduler)
    return result, scheduler
