"""Logarithmic-barrier transform and the staged interior-point driver.

Stage objectives get stiffer along the schedule: their curvature grows
like t in the smooth term and like t^2 along directions of constraints
active at the optimum. Two solver knobs are therefore matched to the stage
scale. The splitting penalty is multiplied by t, which keeps the inner
contraction rate independent of the stage; and the inner tolerances are
divided by t^2, which keeps the decrement test reachable (a direction
error of size e contributes roughly e' H e to the decrement, so the error
budget shrinks with the curvature). Both are constant within a stage, so
every direction computation still factors each agent's system once.

For a block with objective f, inequality functions g_1..g_m, and stage
parameter t > 0, the stage objective is

    h(s)  = t f(s) - sum_j log(-g_j(s))
    h'(s) = t f'(s) + sum_j (-1/g_j) g_j'(s)
    h''(s)= t f''(s) + sum_j [ (1/g_j^2) g_j' g_j'^T - (1/g_j) g_j'' ]

defined where every g_j is strictly negative. Each barrier summand is
positive semidefinite when g_j is convex, so convexity survives the
transform. The driver minimizes the transformed problem for a geometric
schedule of t values, warm-starting every stage from the previous one, and
stops once the duality-gap proxy m/t drops below the target accuracy.
"""

from dataclasses import dataclass, replace

import numpy as np

from .config import SolverConfig
from .errors import BarrierDomainError, InfeasibleStartError
from .network import RoundScheduler
from .newton import StageBlock, newton_solve
from .problem import build_coupling, consistency_error, merge_slices, scatter

# floor for the stage-scaled inner tolerances: squared-norm residuals of
# double-precision iterates at unit scale bottom out around 1e-31, and the
# decrement test never needs anything tighter than about 1e-24
EPS_STAGE_FLOOR = 1e-28


class BarrierFunction:
    """Barrier-transformed stage objective of one block at parameter t."""

    def __init__(self, objective, inequality, t, agent=None):
        if t <= 0:
            raise ValueError("barrier parameter t must be positive")
        self.objective = objective
        self.inequality = tuple(inequality)
        self.t = float(t)
        self.agent = agent

    def _constraint_values(self, s):
        vals = []
        for c, g in enumerate(self.inequality):
            val = g.value(s)
            if val >= 0.0:
                raise BarrierDomainError(
                    f"constraint {c} of agent {self.agent} is not strictly satisfied "
                    f"(value {val:.6e})",
                    agent=self.agent,
                    constraint=c,
                )
            vals.append(val)
        return vals

    def value(self, s):
        vals = self._constraint_values(s)
        return self.t * self.objective.value(s) - sum(np.log(-v) for v in vals)

    def gradient(self, s):
        vals = self._constraint_values(s)
        out = self.t * self.objective.gradient(s)
        for g, val in zip(self.inequality, vals):
            out = out + (-1.0 / val) * g.gradient(s)
        return out

    def hessian(self, s):
        vals = self._constraint_values(s)
        out = self.t * self.objective.hessian(s)
        for g, val in zip(self.inequality, vals):
            gg = g.gradient(s)
            out = out + np.outer(gg, gg) / (val * val) - g.hessian(s) / val
        return out


def barrier_calculus(block, t, point):
    """Value, gradient, and Hessian of a block's barrier transform."""
    fn = BarrierFunction(block.objective, block.inequality, t)
    point = np.asarray(point, dtype=float)
    return fn.value(point), fn.gradient(point), fn.hessian(point)


def barrier_stage(problem, t):
    """Stage blocks for one barrier parameter value."""
    return [
        StageBlock(
            index_set=blk.index_set,
            h=BarrierFunction(blk.objective, blk.inequality, t, agent=i),
            f_true=blk.objective,
            inequality=blk.inequality,
            A_eq=blk.A_eq,
            b_eq=blk.b_eq,
        )
        for i, blk in enumerate(problem.blocks)
    ]


@dataclass
class IpmResult:
    x: np.ndarray
    s_slices: list
    stages: int
    t_final: float
    e_c: float
    m_over_t: float
    outer_iterations: int
    inner_iterations: int
    max_consistency_error: float
    max_dual_average: float
    max_eq_violation: float
    descent_violations: int
    rows: list


def _validate_start(problem, s_slices):
    violations = []
    for i, blk in enumerate(problem.blocks):
        s = s_slices[i]
        for c, g in enumerate(blk.inequality):
            val = g.value(s)
            if not val < 0.0:
                violations.append(
                    f"agent {i} inequality {c}: value {val:.6e} must be strictly negative"
                )
        if blk.A_eq is not None:
            resid = float(np.abs(blk.A_eq @ s - blk.b_eq).max(initial=0.0))
            if resid > 1e-9:
                violations.append(f"agent {i} equality residual {resid:.3e} exceeds 1e-9")
    if violations:
        raise InfeasibleStartError("starting point is infeasible", violations)


def ipm_solve(problem, s0_slices, config, coupling, scheduler, rows=None):
    """Interior-point loop: distributed Newton per stage, geometric t schedule.

    Requires a consistent, strictly feasible start. Stage q minimizes the
    barrier transform at t = t0 mu^q starting from the previous stage's
    solution; the loop ends after the first stage whose duality-gap proxy
    m/t is below eps_p. Factorizations are never reused across stages since
    every stage changes both t and the linearization points.

    Per-stage penalty and inner tolerances are matched to the stage scale
    (see the module docstring); the consistency-error budget therefore uses
    each stage's effective primal tolerance.
    """
    points = [np.array(s, dtype=float) for s in s0_slices]
    if consistency_error(points, coupling) > 1e-12:
        raise InfeasibleStartError("starting slices are not consistent")
    _validate_start(problem, points)

    m = problem.m_total
    rows_out = rows if rows is not None else []
    t = config.t0
    e_c = 0.0
    q = 0
    outer_total = 0
    inner_total = 0
    max_cons = 0.0
    max_dual_avg = 0.0
    max_eq_viol = 0.0
    descent_violations = 0

    while True:
        stage = barrier_stage(problem, t)
        scale = max(1.0, t) ** 2
        stage_config = replace(
            config,
            eps_pri=max(config.eps_pri / scale, EPS_STAGE_FLOOR),
            eps_dual=max(config.eps_dual / scale, EPS_STAGE_FLOOR),
        )
        nres = newton_solve(
            stage, points, stage_config, coupling, scheduler,
            stage_index=q, t=t, e_c=e_c, rows=rows_out,
            rho=config.rho * t, eq_atol=1e-9 if q == 0 else 1e-5,
        )
        points = nres.s_slices
        e_c = nres.e_c
        outer_total += nres.outer_iterations + 1
        inner_total += sum(nres.inner_iterations)
        max_cons = max(max_cons, nres.max_consistency_error)
        max_dual_avg = max(max_dual_avg, nres.max_dual_average)
        max_eq_viol = max(max_eq_viol, nres.max_eq_violation)
        descent_violations += nres.descent_violations
        if m / t < config.eps_p:
            break
        t *= config.mu
        q += 1

    return IpmResult(
        x=merge_slices(points, coupling),
        s_slices=points,
        stages=q + 1,
        t_final=t,
        e_c=e_c,
        m_over_t=m / t,
        outer_iterations=outer_total,
        inner_iterations=inner_total,
        max_consistency_error=max_cons,
        max_dual_average=max_dual_avg,
        max_eq_violation=max_eq_viol,
        descent_violations=descent_violations,
        rows=rows_out,
    )


def solve_ipm(problem, x0, config=None):
    """Convenience driver wiring coupling, scheduler, and the stage loop."""
    config = config or SolverConfig()
    coupling = build_coupling(problem)
    scheduler = RoundScheduler(coupling)
    s0 = scatter(np.asarray(x0, dtype=float), coupling)
    result = ipm_solve(problem, s0, config, coupling, scheduler)
    return result, scheduler
