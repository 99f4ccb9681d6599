"""Distributed computation of the Newton direction by operator splitting.

The direction subproblem at a linearization point is a separable quadratic
model coupled only through the requirement that all local directions be
slices of one global direction. Splitting that requirement off as a
consensus projection yields an iteration in which every agent alternates a
local prox solve against its cached curvature factorization, a one-round
exchange of shared components, and a running dual update:

    ds_i   <- (H_i + rho I)^{-1} (rho (dz_{J_i} + v_i) - grad_i)
    dz_j   <- mean of ds_q[j] over the owners q of variable j
    v_i    <- v_i + (dz_{J_i} - ds_i)

Agents with a local equality system solve the corresponding saddle system
instead, which keeps every iterate in the constraint null space. The
curvature matrix is constant across inner iterations, so each agent
factors exactly once per direction computation no matter how many
iterations are needed.

Per-agent convergence is declared when the squared slice change and the
squared disagreement both fall below their tolerances split evenly across
agents; one flooded AND per iteration turns the local declarations into a
global stop.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DisconnectedNetworkError
from .network import all_agree, exchange_shared_components
from .problem import gather_average, scatter


@dataclass
class AgentDirectionState:
    """One agent's share of a direction computation at one linearization point."""

    index_set: np.ndarray
    grad: np.ndarray
    hess: np.ndarray = field(repr=False)
    factor: object = field(repr=False)
    A_eq: np.ndarray = None

    @property
    def dim(self):
        return len(self.index_set)


class DirectionWorkspace:
    """Per-agent gradients and cached factorizations at one linearization point.

    Building the workspace performs the N factorizations; they stay valid
    for the lifetime of the workspace, which is tied to the linearization
    point it was built from.
    """

    def __init__(self, stage, points, coupling, config, rho=None):
        self.coupling = coupling
        self.rho = config.rho if rho is None else float(rho)
        self.eps_pri = config.eps_pri
        self.eps_dual = config.eps_dual
        self.max_iter = config.admm_max_iter
        self.points = [np.asarray(s, dtype=float) for s in points]
        self.agents = []
        for blk, s, idx in zip(stage, self.points, coupling.index_arrays):
            g = blk.h.gradient(s)
            H = blk.h.hessian(s)
            if blk.A_eq is None:
                fac = linalg.factor_spd(H + self.rho * np.eye(len(s)))
            else:
                fac = linalg.factor_kkt(H, self.rho, blk.A_eq)
            self.agents.append(
                AgentDirectionState(index_set=idx, grad=g, hess=H, factor=fac, A_eq=blk.A_eq)
            )
        self.factorizations = len(self.agents)


def prox_step_unconstrained(agent, dz_slice, v, rho):
    """Local quadratic prox solve against the cached factorization."""
    rhs = rho * (dz_slice + v) - agent.grad
    return agent.factor.solve(rhs)


def prox_step_equality(agent, dz_slice, v, rho):
    """Equality-constrained prox: saddle solve, direction in null(A)."""
    rhs = rho * (dz_slice + v) - agent.grad
    ds, _ = agent.factor.solve(rhs)
    return ds


@dataclass
class DirectionResult:
    """Outcome of one distributed direction computation.

    ``dx`` is the global direction; ``ds_slices`` are its per-agent slices,
    read from the one vector so they are consistent by construction.
    Residuals are the final per-agent maxima of the squared norms the
    termination test uses. ``max_dual_average`` tracks how far the averaged
    dual variables drifted from zero; ``max_eq_violation`` tracks the worst
    violation of the local equality null-space condition over all inner
    iterates.
    """

    converged: bool
    iterations: int
    dx: np.ndarray
    ds_slices: list
    primal_residual: float
    dual_residual: float
    factorizations: int
    max_dual_average: float
    max_eq_violation: float


def compute_direction(workspace, scheduler, dz0=None, v0=None):
    """Run the splitting iteration to consensus on the Newton direction.

    ``dz0`` warm-starts the averaged direction (zeros when omitted). Dual
    variables start at zero, which is what keeps their average in the null
    space of the consensus projection; ``v0`` exists so tests can start at
    a known fixed point and must itself have a zero average.

    A non-converged result (iteration cap) is returned rather than raised;
    the caller decides whether to accept it.
    """
    coupling = workspace.coupling
    agents = workspace.agents
    n_agents = len(agents)
    rho = workspace.rho

    if not scheduler.is_connected and n_agents > 1:
        raise DisconnectedNetworkError(
            "direction computation requires a connected coupling graph"
        )

    dx0 = np.zeros(coupling.n) if dz0 is None else np.asarray(dz0, dtype=float)
    dz = scatter(dx0, coupling)
    if v0 is None:
        v = [np.zeros(a.dim) for a in agents]
    else:
        v = [np.array(vi, dtype=float) for vi in v0]

    eps_pri_i = workspace.eps_pri / n_agents
    eps_dual_i = workspace.eps_dual / n_agents
    max_dual_avg = 0.0
    max_eq_viol = 0.0
    pri = dua = np.inf

    for k in range(workspace.max_iter):
        ds = []
        for i, a in enumerate(agents):
            if a.A_eq is None:
                d = prox_step_unconstrained(a, dz[i], v[i], rho)
            else:
                d = prox_step_equality(a, dz[i], v[i], rho)
                viol = float(np.abs(a.A_eq @ d).max(initial=0.0))
                max_eq_viol = max(max_eq_viol, viol)
            ds.append(d)

        dz_new = exchange_shared_components(scheduler, ds)

        flags = []
        pri = dua = 0.0
        for i in range(n_agents):
            v[i] += dz_new[i] - ds[i]
            e_dual = float(np.sum((dz_new[i] - dz[i]) ** 2))
            e_pri = float(np.sum((ds[i] - dz_new[i]) ** 2))
            flags.append(e_dual <= eps_dual_i and e_pri <= eps_pri_i)
            pri = max(pri, e_pri)
            dua = max(dua, e_dual)

        avg_v = gather_average(v, coupling)
        max_dual_avg = max(max_dual_avg, float(np.abs(avg_v).max(initial=0.0)))

        dz = dz_new
        done, _ = all_agree(scheduler, flags)
        if done:
            dx = np.zeros(coupling.n)
            for i, idx in enumerate(coupling.index_arrays):
                dx[idx] = dz[i]
            return DirectionResult(
                converged=True,
                iterations=k + 1,
                dx=dx,
                ds_slices=[dx[idx].copy() for idx in coupling.index_arrays],
                primal_residual=pri,
                dual_residual=dua,
                factorizations=workspace.factorizations,
                max_dual_average=max_dual_avg,
                max_eq_violation=max_eq_viol,
            )

    dx = np.zeros(coupling.n)
    for i, idx in enumerate(coupling.index_arrays):
        dx[idx] = dz[i]
    return DirectionResult(
        converged=False,
        iterations=workspace.max_iter,
        dx=dx,
        ds_slices=[dx[idx].copy() for idx in coupling.index_arrays],
        primal_residual=pri,
        dual_residual=dua,
        factorizations=workspace.factorizations,
        max_dual_average=max_dual_avg,
        max_eq_violation=max_eq_viol,
    )
