"""Simple and block Kaczmarz solvers.

The block iteration is

    x_j = x_{j-1} + pinv(A_tau) (b_tau - A_tau x_{j-1})

for a block tau drawn by a control scheme from a row paving; the simple
iteration is the one-row special case.  This module provides the step
operations, block-selection control schemes, direct (Cholesky) and iterative
(CG on the block Gram system, warm-started) inner solvers, the solver driver
with convergence monitoring and flop accounting, and evaluation of the
theoretical convergence bound and tolerance floor.

Inner-product convention: <a, x> = sum_k conj(a_k) x_k (np.vdot).  To project
onto the solution set of equation t of A x = b, pass ``a_t = conj(A.row(t))``
so that <a_t, x> = (A x)_t.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .flops import (
    FlopCounter,
    axpy_flops,
    cg_iter_flops,
    cholesky_flops,
    dot_flops,
    fft_flops,
    field_factor,
    flop_model,
    gemv_flops,
    gram_flops,
    tri_solve_flops,
)
from .linops import DenseMatrix, PartialCirculantStack, row_submatrix
from .paving import PavingBounds, compute_paving_bounds

UNIFORM_WITH_REPLACEMENT = "uniform-with-replacement"
CYCLIC_WITHOUT_REPLACEMENT = "cyclic-without-replacement"

DIRECT_GRAM = "direct-gram"
ITERATIVE_CG = "iterative-cg"

__all__ = [
    "UNIFORM_WITH_REPLACEMENT",
    "CYCLIC_WITHOUT_REPLACEMENT",
    "DIRECT_GRAM",
    "ITERATIVE_CG",
    "LeastSquaresProblem",
    "ControlScheme",
    "ControlState",
    "InnerSolver",
    "SolverConfig",
    "TraceRow",
    "SolveReport",
    "IdentityDiagnostics",
    "simple_kaczmarz_step",
    "block_kaczmarz_step",
    "select_block",
    "default_inner_solver",
    "run_block_solver",
    "run_simple_solver",
    "theoretical_bound",
    "tolerance_floor",
    "per_iteration_identity_check",
]


class LeastSquaresProblem:
    """A least-squares instance min_x ||A x - b||.

    ``x_star`` (optional) is a known minimizer, used for error diagnostics;
    the residual at the minimizer is ``e = A x_star - b``, which must be
    orthogonal to the range of A (that is what makes x_star a minimizer).
    """

    def __init__(self, A, b, x_star=None):
        n, d = A.shape
        b = np.asarray(b)
        if b.shape != (n,):
            raise ValueError(f"b must have length {n}, got shape {b.shape}")
        self.A = A
        self.b = b
        self.x_star = None
        self.e = None
        if x_star is not None:
            x_star = np.asarray(x_star)
            if x_star.shape != (d,):
                raise ValueError(f"x_star must have length {d}")
            e = A.matvec(x_star) - b
            e_norm = np.linalg.norm(e)
            if e_norm > 0:
                ortho = np.linalg.norm(A.rmatvec(e))
                if ortho > 1e-8 * A.frobenius_norm() * e_norm:
                    raise ValueError(
                        "x_star is not a least-squares minimizer: the residual "
                        "A x_star - b is not orthogonal to range(A)"
                    )
            self.x_star = x_star
            self.e = e

    @property
    def shape(self):
        return self.A.shape

    def e_norm_sq(self):
        if self.e is None:
            return 0.0
        return float(np.real(np.vdot(self.e, self.e)))

    def residual_norm(self, x):
        return float(np.linalg.norm(self.A.matvec(x) - self.b))


@dataclass(frozen=True)
class ControlScheme:
    """How the solver picks the next block: i.i.d. uniform, or a fresh random
    block order each epoch."""

    kind: str = UNIFORM_WITH_REPLACEMENT
    seed: object = None

    def __post_init__(self):
        if self.kind not in (UNIFORM_WITH_REPLACEMENT, CYCLIC_WITHOUT_REPLACEMENT):
            raise ValueError(f"unknown control scheme {self.kind!r}")

    def make_state(self, m):
        return ControlState(self.kind, m, np.random.default_rng(self.seed))


class ControlState:
    """Mutable block-draw stream for one solve.

    Draws are buffered (a batch of uniform indices, or one permutation per
    epoch) so that a solver loop and an external experiment loop seeded the
    same way consume identical streams.
    """

    BUFFER = 4096

    def __init__(self, kind, m, rng):
        if kind not in (UNIFORM_WITH_REPLACEMENT, CYCLIC_WITHOUT_REPLACEMENT):
            raise ValueError(f"unknown control scheme {kind!r}")
        if m < 1:
            raise ValueError("m must be positive")
        self.kind = kind
        self.m = int(m)
        self.rng = rng
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def next(self):
        if self._pos >= self._buf.size:
            if self.kind == UNIFORM_WITH_REPLACEMENT:
                self._buf = self.rng.integers(0, self.m, size=self.BUFFER)
            else:
                self._buf = self.rng.permutation(self.m)
            self._pos = 0
        i = int(self._buf[self._pos])
        self._pos += 1
        return i


def select_block(state, m, j):
    """Next block index (0-based) for iteration j >= 1 under the control state."""
    if m != state.m:
        raise ValueError(f"state was built for m={state.m}, not {m}")
    if j < 1:
        raise ValueError("iteration index starts at 1")
    return state.next()


@dataclass(frozen=True)
class InnerSolver:
    """How block least-squares corrections are computed.

    DirectGram factors each block Gram matrix once (Cholesky) and back-solves
    on every visit.  IterativeCG runs conjugate gradients on the Gram system
    (A_tau A_tau*) u = r and applies A_tau* u, so corrections always lie in
    range(A_tau*); with ``warm_start`` the last Gram solution per block seeds
    the next visit.
    """

    kind: str = DIRECT_GRAM
    cg_tol: float = 1e-6
    cg_max_iters: int | None = None  # None: 2 * block size
    warm_start: bool = True

    def __post_init__(self):
        if self.kind not in (DIRECT_GRAM, ITERATIVE_CG):
            raise ValueError(f"unknown inner solver {self.kind!r}")
        if self.cg_tol <= 0:
            raise ValueError("cg_tol must be positive")


def default_inner_solver(paving, bounds=None):
    """DirectGram for small blocks or ill-conditioned pavings, CG otherwise."""
    if paving.max_block_size() <= 64:
        return InnerSolver(DIRECT_GRAM)
    if bounds is not None and bounds.alpha > 0 and bounds.beta / bounds.alpha > 100:
        return InnerSolver(DIRECT_GRAM)
    return InnerSolver(ITERATIVE_CG)


@dataclass
class SolverConfig:
    tolerance: float
    paving: object = None  # RowPaving; unused by the simple solver
    control: ControlScheme = field(default_factory=ControlScheme)
    inner: InnerSolver | None = None  # None: choose by default rule
    check_every: int | None = None  # None: every m (block) / n (simple) steps
    max_epochs: int = 200

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.check_every is not None and self.check_every < 1:
            raise ValueError("check_every must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    epoch: int
    flops_model: float
    flops_counted: float
    wall_ns: int
    resid_norm: float
    err_norm: float | None = None
    flag: str = ""


@dataclass
class SolveReport:
    x_hat: np.ndarray
    converged: bool
    iterations: int
    epochs: int
    trace: list
    flags: list = field(default_factory=list)

    @property
    def resid_norm(self):
        return self.trace[-1].resid_norm if self.trace else float("nan")


def simple_kaczmarz_step(x, a_t, b_t):
    """Project x onto the solution set of <a_t, x> = b_t.

    Returns x + ((b_t - <a_t, x>) / ||a_t||^2) a_t.
    """
    a_t = np.asarray(a_t)
    x = np.asarray(x)
    norm_sq = float(np.real(np.vdot(a_t, a_t)))
    if norm_sq == 0.0:
        raise ValueError("cannot project onto a zero row")
    return x + ((b_t - np.vdot(a_t, x)) / norm_sq) * a_t


def _block_entries(A_tau):
    if isinstance(A_tau, DenseMatrix):
        return A_tau.entries
    arr = np.atleast_2d(np.asarray(A_tau))
    if arr.ndim != 2:
        raise ValueError("A_tau must be a matrix")
    return arr


def _factor_gram(G, block_index=None):
    """Cholesky of a block Gram, with a trace-scaled ridge fallback.

    Returns (factorization, flag); flag is nonempty when regularization was
    needed.  Raises LinAlgError when even the regularized system fails.
    """
    where = "" if block_index is None else f" (block {block_index})"
    try:
        return cho_factor(G), ""
    except LinAlgError:
        ridge = 1e-12 * max(float(np.real(np.trace(G))), 1.0)
        try:
            fac = cho_factor(G + ridge * np.eye(G.shape[0], dtype=G.dtype))
        except LinAlgError:
            raise LinAlgError(
                f"block Gram system is numerically singular{where}"
            ) from None
        return fac, f"regularized{where}"


def _gram_cg(G, r, y0, tol, max_iters):
    """CG on the Hermitian PSD system G y = r from initial guess y0.

    Returns (y, iterations, converged); stops on relative residual <= tol.
    """
    r = np.asarray(r)
    if y0 is None:
        y = np.zeros_like(r)
        res = r.copy()
    else:
        y = np.asarray(y0).copy()
        res = r - G @ y
    rhs_norm = np.linalg.norm(r)
    if rhs_norm == 0.0:
        return np.zeros_like(r), 0, True
    p = res.copy()
    rs = float(np.real(np.vdot(res, res)))
    if np.sqrt(rs) <= tol * rhs_norm:
        return y, 0, True
    for it in range(1, max_iters + 1):
        Gp = G @ p
        denom = float(np.real(np.vdot(p, Gp)))
        if denom <= 0.0:
            return y, it - 1, False
        step = rs / denom
        y = y + step * p
        res = res - step * Gp
        rs_new = float(np.real(np.vdot(res, res)))
        if np.sqrt(rs_new) <= tol * rhs_norm:
            return y, it, True
        p = res + (rs_new / rs) * p
        rs = rs_new
    return y, max_iters, False


def block_kaczmarz_step(x, A_tau, b_tau, inner=None, state=None, block_index=None):
    """One block update x + pinv(A_tau)(b_tau - A_tau x).

    ``state`` is an optional per-block mutable cache (dict) owned by the
    caller: DirectGram stores the Cholesky factor, IterativeCG stores the
    Gram matrix and the warm-start solution.  Events (regularized factor,
    CG hitting its iteration cap) are recorded under ``state["flag"]``.
    """
    if inner is None:
        inner = InnerSolver(DIRECT_GRAM)
    entries = _block_entries(A_tau)
    p, d = entries.shape
    x = np.asarray(x)
    b_tau = np.asarray(b_tau)
    if x.shape != (d,) or b_tau.shape != (p,):
        raise ValueError("dimension mismatch between x, A_tau, and b_tau")
    r = b_tau - entries @ x
    cache = state if state is not None else {}
    if inner.kind == DIRECT_GRAM:
        if "cho" not in cache:
            G = entries @ entries.conj().T
            cache["cho"], flag = _factor_gram(G, block_index)
            if flag:
                cache["flag"] = flag
        y = cho_solve(cache["cho"], r)
    else:
        if "gram" not in cache:
            cache["gram"] = entries @ entries.conj().T
        y0 = cache.get("warm") if inner.warm_start else None
        max_iters = inner.cg_max_iters if inner.cg_max_iters is not None else 2 * p
        y, _, ok = _gram_cg(cache["gram"], r, y0, inner.cg_tol, max_iters)
        if inner.warm_start:
            cache["warm"] = y
        if not ok:
            where = "" if block_index is None else f" (block {block_index})"
            cache["flag"] = f"cg-max-iters{where}"
    return x + entries.conj().T @ y


class _DenseBlockHandle:
    """Per-block solve state for dense blocks inside the solver loop.

    Factorization / Gram setup flops are charged lazily at the first visit;
    each visit charges two matrix-vector products, the inner solve, and the
    iterate update.  Model flops equal counted flops for dense steps.
    """

    def __init__(self, entries, block_index, inner, field_kind):
        self.entries = entries
        self.block_index = block_index
        self.inner = inner
        self.field = field_kind
        self.cache = {}

    def visit(self, x, b_tau, counter):
        p, d = self.entries.shape
        self.cache.pop("flag", None)
        if self.inner.kind == DIRECT_GRAM:
            if "cho" not in self.cache:
                counter.add(gram_flops(p, d, self.field) + cholesky_flops(p, self.field))
            x_new = block_kaczmarz_step(
                x, self.entries, b_tau, self.inner, self.cache, self.block_index
            )
            counter.add(
                gemv_flops(p, d, self.field)
                + 2 * tri_solve_flops(p, self.field)
                + gemv_flops(d, p, self.field)
                + axpy_flops(d, self.field)
            )
            return x_new, self.cache.pop("flag", "")
        if "gram" not in self.cache:
            self.cache["gram"] = self.entries @ self.entries.conj().T
            counter.add(gram_flops(p, d, self.field))
        max_iters = (
            self.inner.cg_max_iters if self.inner.cg_max_iters is not None else 2 * p
        )
        r = b_tau - self.entries @ x
        y0 = self.cache.get("warm") if self.inner.warm_start else None
        y, iters, ok = _gram_cg(self.cache["gram"], r, y0, self.inner.cg_tol, max_iters)
        if self.inner.warm_start:
            self.cache["warm"] = y
        flag = "" if ok else f"cg-max-iters (block {self.block_index})"
        x_new = x + self.entries.conj().T @ y
        counter.add(
            gemv_flops(p, d, self.field)
            + iters * cg_iter_flops(p, self.field)
            + gemv_flops(d, p, self.field)
            + axpy_flops(d, self.field)
        )
        return x_new, flag


class _OrthoFFTBlockHandle:
    """Per-block solve for a partial circulant block, whose rows are
    orthonormal: the pseudoinverse is the adjoint, so a visit is two fast
    transforms.  Model flops follow the 4 d log2(d) + 4 d complex-flop model;
    counted flops charge the two FFTs and the vector adds in real flops
    (diagonal +/-1 multiplies are sign flips and cost nothing).
    """

    def __init__(self, stack, block_index):
        self.stack = stack
        self.block_index = block_index
        d = stack.dim
        self._model = flop_model("circulant-block", d)
        self._counted = 2 * fft_flops(d) + 2 * stack.rows_per_block + 2 * d

    def visit(self, x, b_tau, counter):
        i = self.block_index
        r = b_tau - self.stack.apply_block(i, x)
        x_new = x + self.stack.adjoint_block(i, r)
        counter.add(self._counted, self._model)
        return x_new, ""


def _natural_circulant_block(stack, tau):
    """Index of the stack block that tau matches exactly, or None."""
    r = stack.rows_per_block
    lo = int(tau[0])
    if lo % r != 0 or tau.size != r:
        return None
    i = lo // r
    if i >= stack.block_count:
        return None
    if np.array_equal(tau, np.arange(lo, lo + r)):
        return i
    return None


def _make_handle(A, tau, block_index, inner):
    if isinstance(A, PartialCirculantStack):
        i = _natural_circulant_block(A, tau)
        if i is not None:
            return _OrthoFFTBlockHandle(A, i)
    block = row_submatrix(A, tau)
    return _DenseBlockHandle(block.entries, block_index, inner, block.field)


def _err_norm(x, x_star):
    if x_star is None:
        return None
    return float(np.linalg.norm(x - x_star))


def _warn_tolerance_floor(problem, paving, tolerance):
    """Warn when epsilon^2 is at or below the inconsistent-problem floor."""
    e_sq = problem.e_norm_sq()
    if e_sq == 0.0:
        return
    bounds = compute_paving_bounds(problem.A, paving)
    if bounds.alpha <= 0:
        warnings.warn(
            "paving has alpha = 0, so the tolerance floor for this "
            "inconsistent problem is unbounded; convergence is not guaranteed",
            RuntimeWarning,
            stacklevel=3,
        )
        return
    floor = tolerance_floor(bounds, e_sq)
    if tolerance**2 <= floor:
        warnings.warn(
            f"tolerance {tolerance:g} is at or below the tolerance floor "
            f"sqrt((1 + beta/alpha) ||e||^2) = {math.sqrt(floor):g} for this "
            "inconsistent problem; the solver may never report convergence",
            RuntimeWarning,
            stacklevel=3,
        )


def run_block_solver(problem, config, x0=None):
    """Randomized block Kaczmarz driver.

    Starts from ``x0`` (default 0), draws blocks per the control scheme,
    applies block corrections, and evaluates the stopping rule
    ||A x - b||^2 <= tolerance^2 every ``check_every`` iterations (default:
    once per epoch).  The trace records one row per convergence check; the
    residual evaluations themselves are monitoring, not iteration work, so
    they are excluded from both flop columns.
    """
    A, b = problem.A, problem.b
    n, d = A.shape
    paving = config.paving
    if paving is None:
        raise ValueError("block solver requires a paving")
    if paving.n != n:
        raise ValueError("paving does not cover the problem rows")
    m = paving.m
    check_every = config.check_every if config.check_every is not None else m
    inner = config.inner if config.inner is not None else default_inner_solver(paving)
    _warn_tolerance_floor(problem, paving, config.tolerance)

    dtype = np.complex128 if A.field == "complex" or np.iscomplexobj(b) else np.float64
    x = np.zeros(d, dtype=dtype) if x0 is None else np.asarray(x0).astype(dtype)
    state = config.control.make_state(m)
    handles = {}
    counter = FlopCounter()
    tol_sq = config.tolerance**2
    max_iters = config.max_epochs * m
    t0 = time.perf_counter_ns()
    trace = []
    flags = []

    def check(j, flag=""):
        resid = problem.residual_norm(x)
        trace.append(
            TraceRow(
                iter=j,
                epoch=math.ceil(j / m) if j else 0,
                flops_model=counter.model,
                flops_counted=counter.counted,
                wall_ns=time.perf_counter_ns() - t0,
                resid_norm=resid,
                err_norm=_err_norm(x, problem.x_star),
                flag=flag,
            )
        )
        return resid**2 <= tol_sq

    converged = check(0)
    j = 0
    pending_flags = []
    while not converged and j < max_iters:
        j += 1
        i = select_block(state, m, j)
        if i not in handles:
            handles[i] = _make_handle(A, paving[i], i, inner)
        x, flag = handles[i].visit(x, b[paving[i]], counter)
        if flag:
            pending_flags.append(flag)
            flags.append(flag)
        if j % check_every == 0 or j == max_iters:
            converged = check(j, ",".join(pending_flags))
            pending_flags = []
    return SolveReport(
        x_hat=x,
        converged=converged,
        iterations=j,
        epochs=math.ceil(j / m) if j else 0,
        trace=trace,
        flags=flags,
    )


def run_simple_solver(problem, config, x0=None):
    """Simple (single-row) randomized Kaczmarz driver.

    Row t is drawn uniformly at random each iteration (or in a fresh random
    order per epoch under the without-replacement scheme); the convergence
    check runs every ``check_every`` iterations, default once per n-row
    epoch.  Row norms are precomputed once as setup and excluded from flop
    accounting, matching the per-step model of one dot product and one
    scaled addition.
    """
    A, b = problem.A, problem.b
    n, d = A.shape
    if getattr(A, "standardized", False) is False:
        warnings.warn(
            "matrix rows are not standardized to unit norm; the simple "
            "solver's uniform row sampling loses its usual convergence rate",
            RuntimeWarning,
            stacklevel=2,
        )
    check_every = config.check_every if config.check_every is not None else n
    dtype = np.complex128 if A.field == "complex" or np.iscomplexobj(b) else np.float64
    x = np.zeros(d, dtype=dtype) if x0 is None else np.asarray(x0).astype(dtype)
    dense = A.materialize()
    rows_conj = dense.entries.conj()
    norms_sq = np.real(np.einsum("ij,ij->i", dense.entries, rows_conj))
    if np.any(norms_sq == 0.0):
        raise ValueError("matrix has a zero row")
    state = config.control.make_state(n)
    counter = FlopCounter()
    step_counted = dot_flops(d, A.field) + axpy_flops(d, A.field)
    step_model = flop_model("simple", d)
    tol_sq = config.tolerance**2
    max_iters = config.max_epochs * n
    t0 = time.perf_counter_ns()
    trace = []

    def check(j):
        resid = problem.residual_norm(x)
        trace.append(
            TraceRow(
                iter=j,
                epoch=math.ceil(j / n) if j else 0,
                flops_model=counter.model,
                flops_counted=counter.counted,
                wall_ns=time.perf_counter_ns() - t0,
                resid_norm=resid,
                err_norm=_err_norm(x, problem.x_star),
            )
        )
        return resid**2 <= tol_sq

    converged = check(0)
    j = 0
    while not converged and j < max_iters:
        j += 1
        t = select_block(state, n, j)
        a_t = rows_conj[t]
        x = x + ((b[t] - np.vdot(a_t, x)) / norms_sq[t]) * a_t
        counter.add(step_counted, step_model)
        if j % check_every == 0 or j == max_iters:
            converged = check(j)
    return SolveReport(
        x_hat=x,
        converged=converged,
        iterations=j,
        epochs=math.ceil(j / n) if j else 0,
        trace=trace,
        flags=[],
    )


def theoretical_bound(j, sigma_min_sq, bounds, err0_sq, err_res_sq=0.0):
    """Upper bound on the expected squared error after j block iterations:

        [1 - sigma_min^2 / (beta m)]^j * err0_sq
            + (beta/alpha) * err_res_sq / sigma_min^2.

    The contraction bracket is clamped to [0, 1); a bracket at or above 1
    (no guaranteed progress) triggers a warning.
    """
    if sigma_min_sq <= 0:
        raise ValueError("sigma_min_sq must be positive")
    if bounds.alpha <= 0:
        raise ValueError("bound requires alpha > 0 (every block fat, full rank)")
    if bounds.beta <= 0 or bounds.m < 1:
        raise ValueError("bounds must have beta > 0 and m >= 1")
    if j < 0 or err0_sq < 0 or err_res_sq < 0:
        raise ValueError("j, err0_sq, err_res_sq must be nonnegative")
    bracket = 1.0 - sigma_min_sq / (bounds.beta * bounds.m)
    if bracket >= 1.0:
        warnings.warn(
            "contraction bracket >= 1: the bound is vacuous", RuntimeWarning,
            stacklevel=2,
        )
        bracket = np.nextafter(1.0, 0.0)
    bracket = max(bracket, 0.0)
    horizon = (bounds.beta / bounds.alpha) * err_res_sq / sigma_min_sq
    return bracket**j * err0_sq + horizon


def tolerance_floor(bounds, e_norm_sq):
    """Smallest meaningful squared tolerance for an inconsistent problem:
    (1 + beta/alpha) ||e||^2.  Below this, convergence is not guaranteed."""
    if bounds.alpha <= 0:
        raise ValueError("tolerance floor requires alpha > 0")
    if e_norm_sq < 0:
        raise ValueError("e_norm_sq must be nonnegative")
    return (1.0 + bounds.beta / bounds.alpha) * e_norm_sq


@dataclass(frozen=True)
class IdentityDiagnostics:
    """Decomposition of one block step's squared error.

    error_sq_next = contraction_term + inflation_term exactly (orthogonal
    split of the new error into the part of the old error outside
    range(A_tau*) and the residual kick pinv(A_tau) e_tau).
    """

    error_sq_next: float
    contraction_term: float
    inflation_term: float
    relative_identity_gap: float
    block_lambda_min: float
    inflation_bound: float  # ||e_tau||^2 / lambda_min


def per_iteration_identity_check(x_prev, x_next, x_star, A_tau, e_tau):
    """Verify the exact per-step error decomposition for a DirectGram step.

    Checks ||x_next - x_star||^2 = ||(I - pinv(A_tau) A_tau)(x_prev - x_star)||^2
    + ||pinv(A_tau) e_tau||^2 to 1e-9 relative, and the inflation bound
    ||pinv(A_tau) e_tau||^2 <= ||e_tau||^2 / lambda_min(A_tau A_tau*).
    Raises ValueError on violation (stale cache, inexact inner solve, or a
    rank-deficient block); returns the diagnostics otherwise.
    """
    entries = _block_entries(A_tau)
    pinv = np.linalg.pinv(entries)
    u = np.asarray(x_prev) - np.asarray(x_star)
    lhs = float(np.real(np.vdot(np.asarray(x_next) - x_star,
                                np.asarray(x_next) - x_star)))
    contracted = u - pinv @ (entries @ u)
    term1 = float(np.real(np.vdot(contracted, contracted)))
    kick = pinv @ np.asarray(e_tau)
    term2 = float(np.real(np.vdot(kick, kick)))
    scale = max(lhs, term1 + term2, np.finfo(float).tiny)
    gap = abs(lhs - (term1 + term2)) / scale
    if gap > 1e-9:
        raise ValueError(
            f"per-iteration error identity violated: relative gap {gap:.3e} "
            "(inexact inner solve or rank-deficient block)"
        )
    lam_min = float(
        np.linalg.eigvalsh(entries @ entries.conj().T)[0]
    )
    e_sq = float(np.real(np.vdot(e_tau, e_tau)))
    if lam_min > 0:
        bound = e_sq / lam_min
        if term2 > bound * (1 + 1e-9) + 1e-12:
            raise ValueError(
                "inflation term exceeds ||e_tau||^2 / lambda_min: "
                f"{term2:.6e} > {bound:.6e}"
            )
    else:
        bound = float("inf")
    return IdentityDiagnostics(
        error_sq_next=lhs,
        contraction_term=term1,
        inflation_term=term2,
        relative_identity_gap=gap,
        block_lambda_min=lam_min,
        inflation_bound=bound,
    )
