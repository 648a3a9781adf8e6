"""Row pavings: construction, spectral certification, coherence diagnostics,
and the randomized incoherence transform.

A row paving of an n-row matrix is a partition of ``range(n)`` into blocks
together with two-sided bounds (alpha, beta) on the eigenvalues of every
block Gram matrix A_tau A_tau*.  Good pavings (small block count, beta close
to 1) are what make block iteration methods converge in few passes.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linops import (
    EXACT_EIG_CAP,
    DenseMatrix,
    _cg_solve,
    _power_iteration,
    dft_apply,
    eig_bounds_hermitian,
    gram_block,
    row_submatrix,
)

__all__ = [
    "RowPaving",
    "PavingBounds",
    "CoherenceReport",
    "FITOperator",
    "partition_from_permutation",
    "random_partition",
    "single_row_paving",
    "compute_paving_bounds",
    "paving_size_for",
    "check_random_paving_beta",
    "coherence",
    "fit_transform",
    "fit_hypothesis_threshold",
    "check_fit_hypothesis",
]


class RowPaving:
    """Partition of row indices ``0..n-1`` into nonempty blocks.

    Within each block, indices are stored sorted ascending.  Construction
    validates that the blocks are disjoint, nonempty, in-range, and jointly
    exhaustive.
    """

    def __init__(self, n, blocks):
        n = int(n)
        if n < 1:
            raise ValueError("n must be positive")
        clean = []
        seen = np.zeros(n, dtype=bool)
        for tau in blocks:
            idx = np.asarray(tau, dtype=np.int64)
            if idx.ndim != 1 or idx.size < 1:
                raise ValueError("every block must be a nonempty 1-d index set")
            if np.any(idx < 0) or np.any(idx >= n):
                raise ValueError(f"block index out of range for n={n}")
            if np.any(seen[idx]):
                raise ValueError("blocks must be disjoint")
            seen[idx] = True
            idx = np.sort(idx)
            idx.setflags(write=False)
            clean.append(idx)
        if not np.all(seen):
            raise ValueError("blocks must cover every row index")
        self.n = n
        self.blocks = tuple(clean)
        self.m = len(clean)

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return self.blocks[i]

    def __iter__(self):
        return iter(self.blocks)

    def max_block_size(self):
        return max(b.size for b in self.blocks)


@dataclass(frozen=True)
class PavingBounds:
    """Certified paving parameters (m, alpha, beta).

    ``estimated`` marks bounds obtained from iterative eigenvalue estimates
    rather than exact dense eigensolves.
    """

    m: int
    alpha: float
    beta: float
    estimated: bool = False

    def condition_bound(self):
        if self.alpha <= 0.0:
            return float("inf")
        return self.beta / self.alpha


@dataclass(frozen=True)
class CoherenceReport:
    """Largest |<a_i, a_l>| over distinct standardized rows.

    ``max_diagonal_deviation`` records how far the row norms are from 1, as a
    sanity check that the coherence number is meaningful.  When the pair
    budget forces sampling, ``sampled_pairs`` holds the number of distinct
    pairs inspected; it is None for the exhaustive scan.
    """

    max_off_diagonal: float
    max_diagonal_deviation: float
    argmax_pair: tuple
    sampled_pairs: int | None = None


def partition_from_permutation(perm, m):
    """Partition the entries of a permutation of 0..n-1 into m nearly equal
    consecutive slices.

    Slice i (1-based) receives positions floor((i-1) n / m) .. floor(i n / m)
    of the permutation, so block sizes differ by at most one and every slice
    is nonempty whenever m <= n.
    """
    perm = np.asarray(perm, dtype=np.int64)
    n = perm.size
    m = int(m)
    if not 1 <= m <= n:
        raise ValueError("m must lie in [1, n]")
    if np.unique(perm).size != n or perm.min() != 0 or perm.max() != n - 1:
        raise ValueError("perm must be a permutation of 0..n-1")
    cuts = [(i * n) // m for i in range(m + 1)]
    blocks = [perm[cuts[i] : cuts[i + 1]] for i in range(m)]
    return RowPaving(n, blocks)


def random_partition(n, m, rng):
    """Uniformly random partition of n rows into m nearly equal blocks."""
    perm = rng.permutation(int(n))
    return partition_from_permutation(perm, m)


def single_row_paving(n):
    """The trivial paving where every row is its own block (m = n)."""
    n = int(n)
    return RowPaving(n, [[i] for i in range(n)])


def _extreme_gram_eigs_iterative(entries, tol=1e-6, max_iters=5000, seed=0):
    """Iterative (lambda_min, lambda_max) of A_tau A_tau* for oversized blocks.

    Power iteration gives the top eigenvalue; inverse iteration with CG
    solves gives the bottom one.  The Gram matrix is never formed: G u is
    applied as A_tau (A_tau* u).
    """
    p, d = entries.shape
    rng = np.random.default_rng(seed)
    field = "complex" if np.iscomplexobj(entries) else "real"

    def apply_G(u):
        return entries @ (entries.conj().T @ u)

    hi = _power_iteration(apply_G, p, field, tol, max_iters, rng)
    if p > d:
        return 0.0, max(hi, 0.0)  # fat Gram is singular
    v = rng.standard_normal(p)
    if field == "complex":
        v = v + 1j * rng.standard_normal(p)
    v = v / np.linalg.norm(v)
    lo = hi
    for it in range(max_iters):
        try:
            u = _cg_solve(apply_G, v, min(1e-10, tol * 1e-3), 20 * p)
        except RuntimeError:
            return 0.0, max(hi, 0.0)  # numerically singular Gram
        v = u / np.linalg.norm(u)
        lo_new = float(np.real(np.vdot(v, apply_G(v))))
        if it > 0 and abs(lo_new - lo) <= tol * max(abs(lo_new), 1e-300):
            return max(lo_new, 0.0), max(hi, 0.0)
        lo = lo_new
    raise RuntimeError(
        f"inverse iteration on block Gram failed to reach tolerance {tol}"
    )


def compute_paving_bounds(A, paving, cap=EXACT_EIG_CAP):
    """Certify (alpha, beta) for a paving of A by block Gram eigenvalues.

    alpha is the smallest and beta the largest eigenvalue over all block
    Gram matrices.  A block with more rows than columns is rank-deficient,
    so its smallest eigenvalue is pinned to zero without computing it.
    Tiny negative round-off is clamped; an alpha indistinguishable from
    round-off (below size * eps * beta) is reported as exactly zero with a
    warning, because downstream error bounds divide by it.  Blocks larger
    than the exact-eigensolve cap fall back to iterative estimates and mark
    the result ``estimated``.
    """
    if paving.n != A.shape[0]:
        raise ValueError("paving size does not match operator row count")
    alpha = np.inf
    beta = 0.0
    degenerate = False
    estimated = False
    for tau in paving:
        block = row_submatrix(A, tau)
        p = tau.size
        if p > cap:
            lo, hi = _extreme_gram_eigs_iterative(block.entries)
            estimated = True
        else:
            lo, hi = eig_bounds_hermitian(gram_block(block), cap=cap)
        hi = max(hi, 0.0)
        if tau.size > A.shape[1]:
            lo = 0.0  # more rows than columns: Gram is singular
        lo = max(lo, 0.0)
        if 0.0 < lo <= p * np.finfo(float).eps * max(hi, 1.0):
            lo = 0.0
            degenerate = True
        alpha = min(alpha, lo)
        beta = max(beta, hi)
    if degenerate or alpha == 0.0:
        warnings.warn(
            "paving has a numerically rank-deficient block: alpha = 0, "
            "condition bound is infinite",
            RuntimeWarning,
            stacklevel=2,
        )
        alpha = 0.0
    return PavingBounds(
        m=paving.m, alpha=float(alpha), beta=float(beta), estimated=estimated
    )


def paving_size_for(sigma_max, n, c_rand=1.0, delta=0.5):
    """Block count for a random partition of a standardized matrix.

    Picks m proportional to sigma_max^2 log(1+n) / delta^2, clamped to
    [1, n].  With this many blocks a uniformly random partition is, with
    high probability, a paving with beta <= (1+delta) ... up to the
    logarithmic factor that the random-paving guarantee carries.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if sigma_max < 0:
        raise ValueError("sigma_max must be nonnegative")
    if delta <= 0:
        raise ValueError("delta must be positive")
    m = int(np.ceil(c_rand * (sigma_max**2) * np.log(1.0 + n) / delta**2))
    return min(max(m, 1), n)


def check_random_paving_beta(A, m, rng, cap=EXACT_EIG_CAP):
    """Draw one random partition and report (paving, bounds, beta_limit).

    ``beta_limit`` is the 6 log(1+n) threshold that a random partition of a
    standardized matrix with m >= sigma_max^2 blocks satisfies except with
    probability 1/n.
    """
    n = A.shape[0]
    paving = random_partition(n, m, rng)
    bounds = compute_paving_bounds(A, paving, cap=cap)
    beta_limit = 6.0 * np.log(1.0 + n)
    return paving, bounds, float(beta_limit)


def coherence(A, max_pairs=None, rng=None):
    """Maximum |<a_i, a_l>| over distinct rows of a standardized matrix.

    Scans all n(n-1)/2 pairs when that count is within ``max_pairs``
    (default: exhaustive up to 4096 rows); otherwise samples ``max_pairs``
    random distinct pairs and reports the sampled maximum.
    """
    dense = A.materialize() if not isinstance(A, DenseMatrix) else A
    E = dense.entries
    n = E.shape[0]
    if n < 2:
        raise ValueError("coherence needs at least two rows")
    row_norms = np.linalg.norm(E, axis=1)
    max_diag_dev = float(np.max(np.abs(row_norms - 1.0)))
    total_pairs = n * (n - 1) // 2
    if max_pairs is None:
        exhaustive = n <= 4096
    else:
        exhaustive = total_pairs <= int(max_pairs)
    if exhaustive:
        G = np.abs(E @ E.conj().T)
        np.fill_diagonal(G, 0.0)
        flat = int(np.argmax(G))
        i, l = divmod(flat, n)
        return CoherenceReport(
            max_off_diagonal=float(G[i, l]),
            max_diagonal_deviation=max_diag_dev,
            argmax_pair=(min(i, l), max(i, l)),
            sampled_pairs=None,
        )
    if rng is None:
        rng = np.random.default_rng(0)
    budget = int(max_pairs)
    best = -1.0
    best_pair = (0, 1)
    for start in range(0, budget, 65536):
        count = min(65536, budget - start)
        ii = rng.integers(0, n, size=count)
        ll = rng.integers(0, n - 1, size=count)
        ll = np.where(ll >= ii, ll + 1, ll)  # distinct pairs
        vals = np.abs(np.einsum("ij,ij->i", E[ii], E[ll].conj()))
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            a, b = int(ii[k]), int(ll[k])
            best_pair = (min(a, b), max(a, b))
    return CoherenceReport(
        max_off_diagonal=best,
        max_diagonal_deviation=max_diag_dev,
        argmax_pair=best_pair,
        sampled_pairs=budget,
    )


class FITOperator:
    """Composition S A of a fast random unitary S = F E with an operator A.

    E is a diagonal of random signs and F the unitary DFT, so S is unitary:
    least-squares residuals are preserved exactly, while the rows of S A are
    spread out (incoherent) with high probability.  Applications cost one
    length-n transform on top of A's own cost, and the operator is complex
    regardless of A's field.
    """

    def __init__(self, A, signs):
        signs = np.asarray(signs, dtype=np.float64)
        n = A.shape[0]
        if signs.shape != (n,):
            raise ValueError("signs must have one entry per row of A")
        if not np.all(np.abs(signs) == 1.0):
            raise ValueError("signs must be +/-1")
        self.inner = A
        self.signs = signs
        self.signs.setflags(write=False)
        self.shape = A.shape
        self.field = "complex"
        self._dense = None

    def matvec(self, x):
        return dft_apply(self.signs * self.inner.matvec(x), "forward")

    def rmatvec(self, y):
        y = np.asarray(y)
        if y.shape != (self.shape[0],):
            raise ValueError(
                f"dimension mismatch: operator is {self.shape}, y has shape {y.shape}"
            )
        return self.inner.rmatvec(self.signs * dft_apply(y, "inverse"))

    def materialize(self):
        if self._dense is None:
            inner = self.inner.materialize()
            scaled = self.signs[:, None] * inner.entries
            self._dense = DenseMatrix(np.fft.fft(scaled, axis=0, norm="ortho"))
        return self._dense

    def row(self, i):
        return self.materialize().row(i)

    def frobenius_norm(self):
        return self.inner.frobenius_norm()


def fit_transform(A, b, rng, signs=None):
    """Apply the fast incoherence transform to a problem (A, b).

    Returns (W, b_tilde, signs) with W = S A and b_tilde = S b for the
    unitary S = F E built from the given or freshly drawn signs.  Because S
    is unitary, (W, b_tilde) has exactly the same least-squares solution and
    residual norm as (A, b).
    """
    n = A.shape[0]
    if signs is None:
        signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    W = FITOperator(A, signs)
    b = np.asarray(b)
    if b.shape != (n,):
        raise ValueError("b must have one entry per row of A")
    b_tilde = dft_apply(W.signs * b, "forward")
    return W, b_tilde, W.signs


def fit_hypothesis_threshold(n, c_fit=1.0):
    """Spectral-norm budget c_fit * n / log^3(1+n) for the incoherence guarantee."""
    return float(c_fit * n / np.log(1.0 + n) ** 3)


def check_fit_hypothesis(A, c_fit=1.0):
    """Whether the spectral-norm hypothesis for incoherence guarantees holds.

    The transform provably flattens rows only when the spectral norm of the
    standardized matrix is small: sigma_max^2 <= c_fit * n / log^3(1+n)
    (natural log).
    """
    from .linops import sigma_extremes

    est = sigma_extremes(A)
    return bool(est.sigma_max**2 <= fit_hypothesis_threshold(A.shape[0], c_fit))
