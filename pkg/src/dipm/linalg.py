"""Dense symmetric factorizations with reusable solve handles.

Factorizations are computed once, then solved against arbitrarily many
right-hand sides; the prox layer leans on this to amortize one
factorization per agent across a whole inner-iteration run. Every solve is
residual-checked against the original matrix; a single refinement step is
attempted when the bound fails, after which the solve raises.

Handles are immutable after construction and safe for concurrent solves.
A module-level counter records every factorization event so callers can
assert how many factorizations a computation performed.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FactorizationError, RankError, StructureError

RESIDUAL_RTOL = 1e-9
PIVOT_RTOL = 1e-14
_EPS = float(np.finfo(float).eps)


def _solve_bound(rhs_scale, noise_scale, n):
    # contract bound plus the rounding floor of evaluating the residual
    # itself; with heavy cancellation in the right-hand side (late barrier
    # stages) the floor term is the only meaningful part
    return RESIDUAL_RTOL * (1.0 + rhs_scale) + 4.0 * max(n, 1) * _EPS * noise_scale


_factorizations = 0


def factorization_count():
    """Total factorization events since import (monotone counter)."""
    return _factorizations


def _count_one():
    global _factorizations
    _factorizations += 1


def _require_symmetric(M, what):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise StructureError(f"{what} must be square")
    scale = float(np.abs(M).max(initial=0.0))
    if np.abs(M - M.T).max(initial=0.0) > 1e-12 * max(1.0, scale):
        raise StructureError(f"{what} must be symmetric")


def _cholesky_lower(M):
    """Left-looking Cholesky with a pivot floor relative to ||M||_inf."""
    n = M.shape[0]
    L = np.zeros_like(M)
    floor = PIVOT_RTOL * float(np.linalg.norm(M, np.inf)) if n else 0.0
    for k in range(n):
        d = M[k, k] - L[k, :k] @ L[k, :k]
        if d <= floor:
            raise FactorizationError(
                f"pivot {k} fell to {d:.3e} (floor {floor:.3e}); matrix is not positive definite",
                pivot_index=k,
                pivot_value=float(d),
            )
        L[k, k] = np.sqrt(d)
        if k + 1 < n:
            L[k + 1:, k] = (M[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]) / L[k, k]
    return L


def _inverse_from_cholesky(L):
    n = L.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    Linv = solve_triangular(L, np.eye(n), lower=True)
    return Linv.T @ Linv


class SymmetricFactorization:
    """Solve handle for one symmetric positive definite matrix."""

    def __init__(self, M):
        M = np.array(M, dtype=float)
        _require_symmetric(M, "matrix")
        M = 0.5 * (M + M.T)
        self._M = M
        self._inv = _inverse_from_cholesky(_cholesky_lower(M))
        self.shape = M.shape
        self.norm_inf = float(np.linalg.norm(M, np.inf)) if M.size else 0.0
        self.cond_inf = float(
            self.norm_inf * np.linalg.norm(self._inv, np.inf)
        ) if M.size else 1.0

    def solve(self, r):
        """Return x with M x = r, residual-checked and refined once if needed."""
        r = np.asarray(r, dtype=float)
        x = self._inv @ r
        bound = _solve_bound(
            float(np.abs(r).max(initial=0.0)),
            self.norm_inf * float(np.abs(x).max(initial=0.0)),
            r.size,
        )
        res = r - self._M @ x
        if np.abs(res).max(initial=0.0) > bound:
            x = x + self._inv @ res
            res = r - self._M @ x
            if np.abs(res).max(initial=0.0) > bound:
                raise FactorizationError(
                    f"solve residual {np.abs(res).max():.3e} exceeds bound {bound:.3e} after refinement"
                )
        return x


class KKTFactorization:
    """Solve handle for the saddle system [[H + rho I, A'], [A, 0]].

    Solves are carried out by block elimination through the positive
    definite leading block. ``solve`` takes the top-block right-hand side
    (the bottom block is zero in this solver) and returns the primal part
    together with the multiplier; the primal part lies in the null space of
    A to within the residual bound.
    """

    def __init__(self, H, rho, A):
        H = np.array(H, dtype=float)
        _require_symmetric(H, "H")
        if rho <= 0:
            raise StructureError("rho must be positive")
        n = H.shape[0]
        G = 0.5 * (H + H.T) + rho * np.eye(n)
        try:
            Ginv = _inverse_from_cholesky(_cholesky_lower(G))
        except FactorizationError as exc:
            raise FactorizationError(
                f"leading block is indefinite even after adding rho I: {exc}",
                pivot_index=exc.pivot_index,
                pivot_value=exc.pivot_value,
            ) from exc
        self._G = G
        self._Ginv = Ginv
        self.n = n
        self.norm_inf = float(np.linalg.norm(G, np.inf))
        self.cond_inf = float(self.norm_inf * np.linalg.norm(Ginv, np.inf))
        A = np.zeros((0, n)) if A is None else np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[1] != n:
            raise StructureError("A must have one column per primal variable")
        self.p = A.shape[0]
        self._A = A
        self._A_norm = float(np.linalg.norm(A, np.inf)) if self.p else 0.0
        if self.p:
            if np.linalg.matrix_rank(A) < self.p:
                raise RankError("equality matrix is rank deficient")
            W = A @ Ginv @ A.T
            try:
                self._Winv = _inverse_from_cholesky(_cholesky_lower(0.5 * (W + W.T)))
            except FactorizationError as exc:
                raise RankError(f"equality matrix is numerically rank deficient: {exc}") from exc
            self.cond_inf = max(
                self.cond_inf,
                float(np.linalg.norm(W, np.inf) * np.linalg.norm(self._Winv, np.inf)),
            )
        else:
            self._Winv = np.zeros((0, 0))

    def _eliminate(self, r, c):
        y = self._Ginv @ r
        if self.p:
            u = self._Winv @ (self._A @ y - c)
            ds = y - self._Ginv @ (self._A.T @ u)
        else:
            u = np.zeros(0)
            ds = y
        return ds, u

    def _bounds(self, r, ds, u):
        ds_scale = float(np.abs(ds).max(initial=0.0))
        u_scale = float(np.abs(u).max(initial=0.0))
        top = _solve_bound(
            float(np.abs(r).max(initial=0.0)),
            self.norm_inf * ds_scale + self._A_norm * u_scale,
            self.n,
        )
        bottom = _solve_bound(0.0, self._A_norm * ds_scale, self.n)
        return top, bottom

    def _residuals(self, r, ds, u):
        res1 = r - self._G @ ds - (self._A.T @ u if self.p else 0.0)
        res2 = -(self._A @ ds) if self.p else np.zeros(0)
        return res1, res2

    def solve(self, r):
        """Return (ds, u) solving the saddle system with bottom block zero."""
        r = np.asarray(r, dtype=float)
        ds, u = self._eliminate(r, np.zeros(self.p))
        res1, res2 = self._residuals(r, ds, u)
        top, bottom = self._bounds(r, ds, u)
        if np.abs(res1).max(initial=0.0) > top or np.abs(res2).max(initial=0.0) > bottom:
            d1, d2 = self._eliminate(res1, -res2)
            ds = ds + d1
            u = u + d2
            res1, res2 = self._residuals(r, ds, u)
            top, bottom = self._bounds(r, ds, u)
            if np.abs(res1).max(initial=0.0) > top or np.abs(res2).max(initial=0.0) > bottom:
                raise FactorizationError(
                    f"saddle solve residuals ({np.abs(res1).max(initial=0.0):.3e}, "
                    f"{np.abs(res2).max(initial=0.0):.3e}) exceed bounds "
                    f"({top:.3e}, {bottom:.3e}) after refinement"
                )
        return ds, u


def factor_spd(M):
    """Factor a symmetric positive definite matrix; counts one event."""
    f = SymmetricFactorization(M)
    _count_one()
    return f


def factor_kkt(H, rho, A):
    """Factor [[H + rho I, A'], [A, 0]]; counts one event.

    With A empty this degenerates to the positive definite case but keeps
    the (ds, u) return shape, u having length zero.
    """
    f = KKTFactorization(H, rho, A)
    _count_one()
    return f
