"""Loosely coupled problem model.

A problem couples ``N`` agent blocks through a shared global variable of
dimension ``n``. Each block owns an ordered index set into the global
variable (0-based), a smooth convex objective on its local slice, optional
smooth convex inequality constraints, and an optional linear equality
system. The coupling structure derived from the index sets (who owns which
variable, who neighbors whom) is what the distributed layers operate on.

All types are immutable after construction; the operations here are pure
functions, so they are safe to evaluate concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# smooth scalar functions on R^d: value / gradient / hessian
# ---------------------------------------------------------------------------

class QuadraticFunction:
    """f(s) = 1/2 s'Ps + q's + r with P symmetric.

    Serves both as a block objective and, with a convexity check, as the
    left-hand side of a quadratic inequality f(s) <= 0.
    """

    def __init__(self, P, q, r=0.0, require_psd=False, psd_tol=1e-10):
        P = _readonly(P)
        q = _readonly(q)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise StructureError("P must be square")
        if q.shape != (P.shape[0],):
            raise StructureError("q length must match P")
        scale = max(1.0, float(np.abs(P).max()) if P.size else 0.0)
        if np.abs(P - P.T).max(initial=0.0) > 1e-12 * scale:
            raise StructureError("P must be symmetric")
        if require_psd and P.size:
            if float(np.linalg.eigvalsh(P).min()) < -psd_tol * scale:
                raise StructureError("quadratic form must be positive semidefinite")
        self.P = P
        self.q = q
        self.r = float(r)
        self.dim = P.shape[0]

    def value(self, s):
        return 0.5 * float(s @ self.P @ s) + float(self.q @ s) + self.r

    def gradient(self, s):
        return self.P @ s + self.q

    def hessian(self, s):
        return self.P


class SoftplusRidge:
    """f(s) = sum_k log(1 + exp(s_k)) + ridge/2 ||s||^2 + w's.

    Built-in strictly convex nonquadratic test objective. The softplus is
    evaluated in its overflow-safe form max(s, 0) + log1p(exp(-|s|)).
    """

    def __init__(self, dim, ridge=1.0, linear=None):
        if ridge <= 0:
            raise StructureError("ridge must be positive for strong convexity")
        self.dim = int(dim)
        self.ridge = float(ridge)
        self.linear = _readonly(linear if linear is not None else np.zeros(self.dim))
        if self.linear.shape != (self.dim,):
            raise StructureError("linear term length must match dim")

    def value(self, s):
        sp = np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))
        return float(sp.sum() + 0.5 * self.ridge * (s @ s) + self.linear @ s)

    def gradient(self, s):
        sig = 1.0 / (1.0 + np.exp(-s))
        return sig + self.ridge * s + self.linear

    def hessian(self, s):
        sig = 1.0 / (1.0 + np.exp(-s))
        return np.diag(sig * (1.0 - sig)) + self.ridge * np.eye(self.dim)


class CustomFunction:
    """Adapter wrapping plain callables into the value/gradient/hessian protocol."""

    def __init__(self, dim, value_fn, gradient_fn, hessian_fn):
        self.dim = int(dim)
        self._value = value_fn
        self._gradient = gradient_fn
        self._hessian = hessian_fn

    def value(self, s):
        return float(self._value(s))

    def gradient(self, s):
        return np.asarray(self._gradient(s), dtype=float)

    def hessian(self, s):
        return np.asarray(self._hessian(s), dtype=float)


# ---------------------------------------------------------------------------
# blocks and problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentBlock:
    """One agent: index set into the global variable plus its local calculus.

    ``index_set`` must be strictly increasing and duplicate-free (0-based).
    ``inequality`` holds zero or more smooth convex constraint functions
    g(s) <= 0 on the local slice. ``A_eq``/``b_eq``, when present, impose
    A s = b with A of full row rank p < |index_set|.
    """

    index_set: tuple
    objective: object
    inequality: tuple = ()
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        idx = tuple(int(j) for j in self.index_set)
        if len(idx) == 0:
            raise StructureError("index set must be nonempty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise StructureError("index set must be strictly increasing")
        if idx[0] < 0:
            raise StructureError("index set entries must be nonnegative")
        object.__setattr__(self, "index_set", idx)
        object.__setattr__(self, "inequality", tuple(self.inequality))
        if (self.A_eq is None) != (self.b_eq is None):
            raise StructureError("equality needs both A and b")
        if self.A_eq is not None:
            A = _readonly(self.A_eq)
            b = _readonly(self.b_eq)
            if A.ndim != 2 or A.shape[1] != len(idx):
                raise StructureError("A must be p x |index_set|")
            if b.shape != (A.shape[0],):
                raise StructureError("b length must match rows of A")
            p = A.shape[0]
            if p >= len(idx):
                raise StructureError("need fewer equality rows than local variables")
            if np.linalg.matrix_rank(A) < p:
                raise StructureError("equality matrix must have full row rank")
            object.__setattr__(self, "A_eq", A)
            object.__setattr__(self, "b_eq", b)

    @property
    def dim(self):
        return len(self.index_set)

    @property
    def n_ineq(self):
        return len(self.inequality)


@dataclass(frozen=True)
class LooselyCoupledProblem:
    """N agent blocks jointly covering a global variable of dimension n."""

    n: int
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.blocks) < 1:
            raise StructureError("need at least one block")
        covered = set()
        for k, blk in enumerate(self.blocks):
            if blk.index_set[-1] >= self.n:
                raise StructureError(
                    f"block {k} references index {blk.index_set[-1]} outside 0..{self.n - 1}"
                )
            covered.update(blk.index_set)
        missing = sorted(set(range(self.n)) - covered)
        if missing:
            raise StructureError(f"global variable {missing[0]} is covered by no block")

    @property
    def n_agents(self):
        return len(self.blocks)

    @property
    def m_total(self):
        return sum(blk.n_ineq for blk in self.blocks)


@dataclass(frozen=True)
class CouplingStructure:
    """Ownership and adjacency derived from the index sets.

    ``owners[j]`` lists (ascending) the agents whose index set contains j;
    ``degrees[j]`` is its length. ``neighbors[i]`` lists the agents (other
    than i itself) sharing at least one variable with agent i. The stacked
    selection matrix has Gram matrix diag(degrees).
    """

    n: int
    owners: tuple
    degrees: np.ndarray
    neighbors: tuple
    index_arrays: tuple = field(repr=False)
    global_to_local: tuple = field(repr=False)

    @property
    def n_agents(self):
        return len(self.neighbors)

    @property
    def max_degree(self):
        """Largest number of agents sharing one variable (looseness measure)."""
        return int(self.degrees.max())

    def local_slice(self, agent, x):
        return x[self.index_arrays[agent]]


def build_coupling(problem):
    """Derive the CouplingStructure of a problem.

    Raises StructureError (naming the first offending index) if some global
    variable belongs to no block; otherwise the output satisfies the
    ownership/adjacency invariants by construction.
    """
    n = problem.n
    owners = [[] for _ in range(n)]
    for i, blk in enumerate(problem.blocks):
        for j in blk.index_set:
            owners[j].append(i)
    for j, o in enumerate(owners):
        if not o:
            raise StructureError(f"global variable {j} is covered by no block")
    neighbors = [set() for _ in problem.blocks]
    for o in owners:
        for a in o:
            for b in o:
                if a != b:
                    neighbors[a].add(b)
    degrees = _readonly([len(o) for o in owners])
    index_arrays = tuple(
        _readonly(blk.index_set, dtype=np.intp) for blk in problem.blocks
    )
    g2l = tuple(
        {j: k for k, j in enumerate(blk.index_set)} for blk in problem.blocks
    )
    return CouplingStructure(
        n=n,
        owners=tuple(tuple(o) for o in owners),
        degrees=degrees,
        neighbors=tuple(tuple(sorted(s)) for s in neighbors),
        index_arrays=index_arrays,
        global_to_local=g2l,
    )


# ---------------------------------------------------------------------------
# slice algebra
# ---------------------------------------------------------------------------

def scatter(x, coupling):
    """Split a global vector into per-agent local slices x_{J_i}."""
    x = np.asarray(x, dtype=float)
    if x.shape != (coupling.n,):
        raise StructureError(f"expected global vector of length {coupling.n}")
    return [x[idx].copy() for idx in coupling.index_arrays]


def gather_average(slices, coupling):
    """Average the agents' copies of each global variable.

    Contributions are accumulated in ascending agent index so results are
    reproducible bit for bit; the result equals the orthogonal projection
    of the stacked slices onto consistent configurations, expressed as a
    global vector.
    """
    z = np.zeros(coupling.n)
    for i, s in enumerate(slices):
        idx = coupling.index_arrays[i]
        if np.shape(s) != idx.shape:
            raise StructureError(f"slice {i} has wrong length")
        z[idx] += s
    z /= coupling.degrees
    return z


def merge_slices(slices, coupling):
    """Assemble the global vector from slices assumed consistent.

    Each global component is written from every owner in turn; for
    consistent input all writes agree, so the result is a cheap exact
    inverse of :func:`scatter`.
    """
    x = np.zeros(coupling.n)
    for i, s in enumerate(slices):
        x[coupling.index_arrays[i]] = s
    return x


def consistency_error(slices, coupling):
    """Max deviation of the slices from their own consensus projection."""
    z = gather_average(slices, coupling)
    err = 0.0
    for i, s in enumerate(slices):
        d = np.abs(s - z[coupling.index_arrays[i]])
        if d.size:
            err = max(err, float(d.max()))
    return err


# ---------------------------------------------------------------------------
# finite-difference validation of user calculus
# ---------------------------------------------------------------------------

@dataclass
class DerivativeCheck:
    """Relative errors of analytic derivatives against central differences."""

    grad_rel_error: float
    hess_rel_error: float
    hess_asymmetry: float
    inequality_grad_errors: list
    inequality_hess_errors: list

    @property
    def max_rel_error(self):
        errs = [self.grad_rel_error, self.hess_rel_error]
        errs += self.inequality_grad_errors + self.inequality_hess_errors
        return max(errs)


def fd_gradient(func, x, h):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fp, fm = func.value(x + e), func.value(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise StructureError(f"non-finite value at perturbed point (coordinate {k})")
        g[k] = (fp - fm) / (2 * h)
    return g


def fd_hessian(func, x, h):
    """Central differences of the analytic gradient, symmetrized."""
    x = np.asarray(x, dtype=float)
    H = np.zeros((x.size, x.size))
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        gp, gm = func.gradient(x + e), func.gradient(x - e)
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise StructureError(f"non-finite gradient at perturbed point (coordinate {k})")
        H[:, k] = (gp - gm) / (2 * h)
    return 0.5 * (H + H.T)


def _check_one(func, x, h):
    ga, gn = func.gradient(x), fd_gradient(func, x, h)
    g_err = float(np.abs(ga - gn).max() / (1.0 + np.abs(gn).max()))
    Ha, Hn = func.hessian(x), fd_hessian(func, x, h)
    h_err = float(np.abs(Ha - Hn).max() / (1.0 + np.abs(Hn).max()))
    asym = float(np.abs(Ha - Ha.T).max() / (1.0 + np.abs(Ha).max()))
    return g_err, h_err, asym


def check_finite_difference(block_or_function, point, h=1e-6):
    """Compare analytic gradients/Hessians to central differences.

    Accepts either a single value/gradient/hessian object or an AgentBlock,
    in which case the objective and every inequality are checked. Returns a
    DerivativeCheck report; callers decide what error level is acceptable.
    """
    point = np.asarray(point, dtype=float)
    if isinstance(block_or_function, AgentBlock):
        g_err, h_err, asym = _check_one(block_or_function.objective, point, h)
        iq_g, iq_h = [], []
        for g in block_or_function.inequality:
            e1, e2, a2 = _check_one(g, point, h)
            iq_g.append(e1)
            iq_h.append(e2)
            asym = max(asym, a2)
        return DerivativeCheck(g_err, h_err, asym, iq_g, iq_h)
    g_err, h_err, asym = _check_one(block_or_function, point, h)
    return DerivativeCheck(g_err, h_err, asym, [], [])
