"""Centralized dense reference solvers used to cross-check the distributed path.

Everything here assembles the global problem explicitly and solves it with
plain dense linear algebra (numpy's LAPACK bindings), deliberately sharing
no code with the distributed solver or its factorization layer. Cubic cost
is fine; these exist for correctness comparisons at desk scale, not speed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    FactorizationError,
    InfeasibleStartError,
    IterationCapError,
    LineSearchError,
)


@dataclass
class DenseProblem:
    """Globally assembled objective, inequalities, and equalities.

    ``inequalities`` is a list of (value, gradient, hessian) triples of
    callables on the global variable. ``A``/``b`` stack every block's
    equality rows (and, for the lifted form, the consistency rows).
    """

    n: int
    value: object
    gradient: object
    hessian: object
    inequalities: list
    A: np.ndarray = None
    b: np.ndarray = None


def _lift_block_fn(fn, idx, n):
    idx = np.asarray(idx, dtype=np.intp)

    def value(x):
        return fn.value(x[idx])

    def gradient(x):
        g = np.zeros(n)
        g[idx] = fn.gradient(x[idx])
        return g

    def hessian(x):
        H = np.zeros((n, n))
        H[np.ix_(idx, idx)] = fn.hessian(x[idx])
        return H

    return value, gradient, hessian


def assemble_dense(problem):
    """Reduced global form: objective summed through the index maps."""
    n = problem.n
    parts = [
        _lift_block_fn(blk.objective, blk.index_set, n) for blk in problem.blocks
    ]

    def value(x):
        return sum(p[0](x) for p in parts)

    def gradient(x):
        g = np.zeros(n)
        for blk in problem.blocks:
            idx = np.asarray(blk.index_set, dtype=np.intp)
            g[idx] += blk.objective.gradient(x[idx])
        return g

    def hessian(x):
        H = np.zeros((n, n))
        for blk in problem.blocks:
            idx = np.asarray(blk.index_set, dtype=np.intp)
            H[np.ix_(idx, idx)] += blk.objective.hessian(x[idx])
        return H

    inequalities = []
    for blk in problem.blocks:
        for g in blk.inequality:
            inequalities.append(_lift_block_fn(g, blk.index_set, n))

    A_rows, b_rows = [], []
    for blk in problem.blocks:
        if blk.A_eq is not None:
            E = np.zeros((blk.dim, n))
            E[np.arange(blk.dim), np.asarray(blk.index_set, dtype=np.intp)] = 1.0
            A_rows.append(blk.A_eq @ E)
            b_rows.append(blk.b_eq)
    A = np.vstack(A_rows) if A_rows else None
    b = np.concatenate(b_rows) if b_rows else None
    return DenseProblem(n, value, gradient, hessian, inequalities, A, b)


def assemble_lifted(problem):
    """Lifted form over (local copies, global variable) with consistency rows.

    The variable is (s^1, ..., s^N, x); the objective touches only the
    copies, and the consistency rows force every copy to equal its slice of
    x. Used as a cross-check of the reduced form.
    """
    dims = [blk.dim for blk in problem.blocks]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    total_s = int(offsets[-1])
    n_tot = total_s + problem.n

    def value(y):
        return sum(
            blk.objective.value(y[offsets[i]:offsets[i + 1]])
            for i, blk in enumerate(problem.blocks)
        )

    def gradient(y):
        g = np.zeros(n_tot)
        for i, blk in enumerate(problem.blocks):
            g[offsets[i]:offsets[i + 1]] = blk.objective.gradient(y[offsets[i]:offsets[i + 1]])
        return g

    def hessian(y):
        H = np.zeros((n_tot, n_tot))
        for i, blk in enumerate(problem.blocks):
            sl = slice(offsets[i], offsets[i + 1])
            H[sl, sl] = blk.objective.hessian(y[sl])
        return H

    inequalities = []
    for i, blk in enumerate(problem.blocks):
        sl_idx = np.arange(offsets[i], offsets[i + 1])
        for g in blk.inequality:
            inequalities.append(_lift_block_fn(g, sl_idx, n_tot))

    # consistency rows:  s^i - x_{J_i} = 0
    A_rows = [np.zeros((total_s, n_tot))]
    A_rows[0][np.arange(total_s), np.arange(total_s)] = -1.0
    for i, blk in enumerate(problem.blocks):
        for k, j in enumerate(blk.index_set):
            A_rows[0][offsets[i] + k, total_s + j] = 1.0
    b_rows = [np.zeros(total_s)]
    for i, blk in enumerate(problem.blocks):
        if blk.A_eq is not None:
            row = np.zeros((blk.A_eq.shape[0], n_tot))
            row[:, offsets[i]:offsets[i + 1]] = blk.A_eq
            A_rows.append(row)
            b_rows.append(blk.b_eq)
    A = np.vstack(A_rows)
    b = np.concatenate(b_rows)
    return DenseProblem(n_tot, value, gradient, hessian, inequalities, A, b), offsets


def _newton_direction(H, g, A):
    n = H.shape[0]
    if A is None or A.shape[0] == 0:
        try:
            dx = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"singular Newton system: {exc}") from exc
        return dx, np.zeros(0)
    p = A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-g, np.zeros(p)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"singular KKT system: {exc}") from exc
    return sol[:n], sol[n:]


def centralized_newton(dense, x0, eps_nt=1e-8, armijo_a=0.2, shrink_b=0.5,
                       max_backtracks=60, max_iter=200, history=None):
    """Equality-constrained Newton with backtracking on the true objective.

    The starting point must satisfy the equality system. Objective values
    may be +inf outside the domain (barrier stages); the line search simply
    backtracks past such points. When several consecutive accepted steps
    fail to decrease the objective by more than its own representable
    resolution, the point is the minimizer to working precision and is
    returned as such; very stiff barrier stages can bottom out this way a
    little above the decrement threshold. ``history``, when given, receives
    one (iteration, half decrement, step, objective) tuple per iteration.
    """
    x = np.array(x0, dtype=float)
    if dense.A is not None and dense.A.shape[0]:
        if float(np.abs(dense.A @ x - dense.b).max()) > 1e-8:
            raise InfeasibleStartError("x0 does not satisfy the equality system")
    stalled = 0
    for it in range(max_iter):
        g = dense.gradient(x)
        H = dense.hessian(x)
        dx, _ = _newton_direction(H, g, dense.A)
        lam2 = float(dx @ H @ dx)
        if lam2 / 2.0 <= eps_nt:
            if history is not None:
                history.append((it, lam2 / 2.0, 0.0, dense.value(x)))
            return x
        f0 = dense.value(x)
        slope = float(g @ dx)
        # allowance for rounding of the objective itself: late barrier stages
        # have values around t |F| whose representable resolution can exceed
        # the per-step decrease near the stage center
        noise = 8.0 * np.finfo(float).eps * (1.0 + abs(f0))
        alpha = 1.0
        for _ in range(max_backtracks + 1):
            cand_val = dense.value(x + alpha * dx)
            if np.isfinite(cand_val) and cand_val <= f0 + armijo_a * alpha * slope + noise:
                break
            alpha *= shrink_b
        else:
            raise LineSearchError("centralized line search exhausted its budget")
        if history is not None:
            history.append((it, lam2 / 2.0, alpha, f0))
        x = x + alpha * dx
        stalled = stalled + 1 if f0 - cand_val <= noise else 0
        if stalled >= 5:
            return x
    raise IterationCapError("centralized Newton hit its iteration cap")


def _barrier_dense(dense, t):
    """Dense barrier transform; value is +inf outside the strict domain."""

    def value(x):
        total = t * dense.value(x)
        for gv, _, _ in dense.inequalities:
            val = gv(x)
            if val >= 0.0:
                return np.inf
            total -= np.log(-val)
        return total

    def gradient(x):
        out = t * dense.gradient(x)
        for gv, gg, _ in dense.inequalities:
            out = out + (-1.0 / gv(x)) * gg(x)
        return out

    def hessian(x):
        out = t * dense.hessian(x)
        for gv, gg, gh in dense.inequalities:
            val, grd = gv(x), gg(x)
            out = out + np.outer(grd, grd) / (val * val) - gh(x) / val
        return out

    return DenseProblem(dense.n, value, gradient, hessian, [], dense.A, dense.b)


def centralized_ipm(dense, x0, t0=1.0, mu=10.0, eps_p=1e-6, eps_nt=1e-8,
                    history=None, **newton_kw):
    """Reference barrier method on the assembled problem.

    ``history`` receives (stage, t, iteration, half decrement, step,
    barrier objective) tuples when given.
    """
    x = np.array(x0, dtype=float)
    for gv, _, _ in dense.inequalities:
        if gv(x) >= 0.0:
            raise InfeasibleStartError("x0 is not strictly feasible")
    m = len(dense.inequalities)
    t = t0
    q = 0
    while True:
        stage_rows = [] if history is not None else None
        x = centralized_newton(_barrier_dense(dense, t), x, eps_nt=eps_nt,
                               history=stage_rows, **newton_kw)
        if history is not None:
            history.extend((q, t) + row for row in stage_rows)
        if m / t < eps_p:
            return x
        t *= mu
        q += 1


def direct_direction(problem, s_slices, coupling):
    """Dense ground truth for the distributed direction computation.

    Eliminates the local copies through the consistency constraints and
    solves the reduced normal equations: the scattered block Hessians
    against the scattered block gradients at the current linearization
    point. Returns (per-agent slices, global direction).
    """
    n = problem.n
    H = np.zeros((n, n))
    g = np.zeros(n)
    for blk, s in zip(problem.blocks, s_slices):
        idx = np.asarray(blk.index_set, dtype=np.intp)
        H[np.ix_(idx, idx)] += blk.objective.hessian(np.asarray(s, dtype=float))
        g[idx] += blk.objective.gradient(np.asarray(s, dtype=float))
    try:
        dx = np.linalg.solve(H, -g)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"reduced Hessian is singular; problem is not strongly convex "
            f"on the coupled space: {exc}"
        ) from exc
    ds = [dx[idx] for idx in coupling.index_arrays]
    return ds, dx
