"""Dense and structured linear operators, the unitary DFT, Gram blocks, and
spectral estimates.

All operators expose:

* ``shape`` -- (rows, cols)
* ``field`` -- ``"real"`` or ``"complex"`` (one scalar field per problem)
* ``matvec(x)`` / ``rmatvec(y)`` -- apply the operator / its adjoint
* ``row(i)`` -- one row as a 1-d array
* ``materialize()`` -- dense representation (for tests and small problems;
  structured operators are never densified implicitly)

Everything here is immutable after construction and safe to share.
"""

from dataclasses import dataclass

import numpy as np

EXACT_EIG_CAP = 512
STANDARDIZED_TOL = 1e-12

__all__ = [
    "EXACT_EIG_CAP",
    "STANDARDIZED_TOL",
    "DenseMatrix",
    "PartialCirculantStack",
    "SpectralEstimates",
    "dft_apply",
    "matvec",
    "adjoint_matvec",
    "row_submatrix",
    "gram_block",
    "eig_bounds_hermitian",
    "sigma_extremes",
]


def dft_apply(x, direction="forward"):
    """Unitary discrete Fourier transform of a length-n vector.

    Both directions carry the 1/sqrt(n) scaling, so forward and inverse are
    exact adjoints/inverses of each other and both preserve the 2-norm.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("dft_apply expects a nonempty 1-d vector")
    if direction == "forward":
        return np.fft.fft(x, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft(x, norm="ortho")
    raise ValueError(f"unknown direction {direction!r}")


def _field_of(arr):
    return "complex" if np.iscomplexobj(arr) else "real"


class DenseMatrix:
    """Row-major dense matrix over a real or complex scalar field.

    ``standardized`` is detected at construction: it is set when every row
    has Euclidean norm 1 within ``STANDARDIZED_TOL``.
    """

    def __init__(self, entries):
        entries = np.atleast_2d(np.asarray(entries))
        if entries.ndim != 2:
            raise ValueError("entries must form a 2-d array")
        n, d = entries.shape
        if n < 1 or d < 1:
            raise ValueError("matrix must have at least one row and column")
        if entries.dtype.kind not in "fc":
            entries = entries.astype(np.float64)
        self.entries = np.ascontiguousarray(entries)
        self.entries.setflags(write=False)
        self.shape = (n, d)
        self.field = _field_of(self.entries)
        row_norms = np.linalg.norm(self.entries, axis=1)
        self.standardized = bool(np.max(np.abs(row_norms - 1.0)) <= STANDARDIZED_TOL)

    @property
    def n(self):
        return self.shape[0]

    @property
    def d(self):
        return self.shape[1]

    def matvec(self, x):
        x = np.asarray(x)
        if x.shape != (self.shape[1],):
            raise ValueError(
                f"dimension mismatch: operator is {self.shape}, x has shape {x.shape}"
            )
        return self.entries @ x

    def rmatvec(self, y):
        y = np.asarray(y)
        if y.shape != (self.shape[0],):
            raise ValueError(
                f"dimension mismatch: operator is {self.shape}, y has shape {y.shape}"
            )
        return self.entries.conj().T @ y

    def row(self, i):
        return self.entries[i]

    def materialize(self):
        return self

    def frobenius_norm(self):
        return float(np.linalg.norm(self.entries))


class PartialCirculantStack:
    """Vertical stack of partial circulant blocks with orthonormal rows.

    Block i maps x to the first ``rows_per_block`` coordinates of
    F* E_i F x, where F is the unitary DFT and E_i is a diagonal of
    independent random signs.  Each block therefore has exactly orthonormal
    rows (block Gram = identity), every row of the stack has unit norm, and
    the block pseudoinverse equals the block adjoint.

    Applications use one FFT and one inverse FFT of length ``dim`` per block;
    the numpy-scaling of the fft/ifft pair cancels the unitary constants.
    """

    def __init__(self, signs, rows_per_block):
        signs = np.asarray(signs, dtype=np.float64)
        if signs.ndim != 2:
            raise ValueError("signs must be a (block_count, dim) array")
        if not np.all(np.abs(signs) == 1.0):
            raise ValueError("signs must be +/-1")
        block_count, dim = signs.shape
        if not 1 <= rows_per_block <= dim:
            raise ValueError("rows_per_block must lie in [1, dim]")
        self.signs = signs
        self.signs.setflags(write=False)
        self.block_count = block_count
        self.rows_per_block = int(rows_per_block)
        self.dim = dim
        self.shape = (block_count * rows_per_block, dim)
        self.field = "complex"
        self.standardized = True
        self._dense = None

    def apply_block(self, i, x):
        """Apply block i to a length-dim vector."""
        return np.fft.ifft(self.signs[i] * np.fft.fft(x))[: self.rows_per_block]

    def adjoint_block(self, i, y):
        """Apply the adjoint of block i to a length-rows_per_block vector."""
        u = np.zeros(self.dim, dtype=np.complex128)
        u[: self.rows_per_block] = y
        return np.fft.ifft(self.signs[i] * np.fft.fft(u))

    def matvec(self, x):
        x = np.asarray(x)
        if x.shape != (self.dim,):
            raise ValueError(
                f"dimension mismatch: operator is {self.shape}, x has shape {x.shape}"
            )
        out = np.empty(self.shape[0], dtype=np.complex128)
        r = self.rows_per_block
        for i in range(self.block_count):
            out[i * r : (i + 1) * r] = self.apply_block(i, x)
        return out

    def rmatvec(self, y):
        y = np.asarray(y)
        if y.shape != (self.shape[0],):
            raise ValueError(
                f"dimension mismatch: operator is {self.shape}, y has shape {y.shape}"
            )
        r = self.rows_per_block
        out = np.zeros(self.dim, dtype=np.complex128)
        for i in range(self.block_count):
            out += self.adjoint_block(i, y[i * r : (i + 1) * r])
        return out

    def block_range(self, i):
        r = self.rows_per_block
        return i * r, (i + 1) * r

    def materialize(self):
        if self._dense is None:
            eye = np.eye(self.dim, dtype=np.complex128)
            blocks = []
            for i in range(self.block_count):
                spectra = self.signs[i][:, None] * np.fft.fft(eye, axis=0)
                blocks.append(np.fft.ifft(spectra, axis=0)[: self.rows_per_block])
            self._dense = DenseMatrix(np.vstack(blocks))
        return self._dense

    def row(self, i):
        return self.materialize().row(i)

    def frobenius_norm(self):
        # every row has unit norm exactly
        return float(np.sqrt(self.shape[0]))


@dataclass(frozen=True)
class SpectralEstimates:
    """Extreme singular values of an operator and how they were obtained."""

    sigma_max: float
    sigma_min: float
    method: str  # "exact-small" | "power-iteration"


def matvec(A, x):
    """Apply operator A to x (dimension-checked)."""
    return A.matvec(np.asarray(x))


def adjoint_matvec(A, y):
    """Apply the conjugate-transpose of A to y (dimension-checked)."""
    return A.rmatvec(np.asarray(y))


def row_submatrix(A, tau):
    """Rows of A selected by the index set tau, in ascending index order.

    Raises on duplicate or out-of-range indices.
    """
    dense = A.materialize() if not isinstance(A, DenseMatrix) else A
    idx = np.asarray(tau, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 1:
        raise ValueError("tau must be a nonempty 1-d index set")
    n = dense.shape[0]
    if np.any(idx < 0) or np.any(idx >= n):
        raise ValueError(f"row index out of range for matrix with {n} rows")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate row index in tau")
    return DenseMatrix(dense.entries[np.sort(idx)])


def gram_block(A_tau):
    """Gram matrix A_tau A_tau* of a block of rows."""
    entries = A_tau.entries if isinstance(A_tau, DenseMatrix) else np.atleast_2d(A_tau)
    return entries @ entries.conj().T


def eig_bounds_hermitian(H, cap=EXACT_EIG_CAP):
    """Smallest and largest eigenvalues of a Hermitian matrix (exact dense solve).

    Intended for desk-scale matrices; refuses sizes beyond ``cap`` (callers
    fall back to iterative estimates) and non-Hermitian input beyond a small
    tolerance.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    if H.shape[0] > cap:
        raise ValueError(f"matrix size {H.shape[0]} exceeds exact eigensolve cap {cap}")
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > 1e-10 * max(1.0, scale):
        raise ValueError("matrix is not Hermitian within tolerance")
    w = np.linalg.eigvalsh(H)
    return float(w[0]), float(w[-1])


def _normal_matrix(A):
    """Dense A* A for an operator with at most EXACT_EIG_CAP columns."""
    dense = A.materialize()
    E = dense.entries
    return E.conj().T @ E


def _power_iteration(apply_B, d, field, tol, max_iters, rng):
    v = rng.standard_normal(d)
    if field == "complex":
        v = v + 1j * rng.standard_normal(d)
    v = v / np.linalg.norm(v)
    lam = 0.0
    for it in range(max_iters):
        w = apply_B(v)
        lam_new = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if it > 0 and abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise RuntimeError(
        f"power iteration failed to converge to relative tolerance {tol} "
        f"within {max_iters} iterations"
    )


def _cg_solve(apply_B, b, tol, max_iters):
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(np.real(np.vdot(r, r)))
    b_norm = np.sqrt(float(np.real(np.vdot(b, b))))
    if b_norm == 0.0:
        return x
    for _ in range(max_iters):
        Bp = apply_B(p)
        denom = float(np.real(np.vdot(p, Bp)))
        if denom <= 0.0:
            break
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * Bp
        rs_new = float(np.real(np.vdot(r, r)))
        if np.sqrt(rs_new) <= tol * b_norm:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise RuntimeError("inner CG solve failed to converge")


def sigma_extremes(A, cap=EXACT_EIG_CAP, tol=1e-6, max_iters=5000, seed=0):
    """Extreme singular values of A.

    For up to ``cap`` columns this is an exact dense eigensolve of A*A.
    Beyond the cap: power iteration on A*A estimates the largest squared
    singular value, and inverse iteration (CG solves with A*A) estimates the
    smallest, both to relative tolerance ``tol``; failure to converge within
    the iteration budget raises.
    """
    n, d = A.shape
    if d <= cap:
        B = _normal_matrix(A)
        w = np.clip(np.linalg.eigvalsh(B), 0.0, None)
        return SpectralEstimates(
            sigma_max=float(np.sqrt(w[-1])),
            sigma_min=float(np.sqrt(w[0])),
            method="exact-small",
        )

    rng = np.random.default_rng(seed)

    def apply_B(v):
        return A.rmatvec(A.matvec(v))

    lam_max = _power_iteration(apply_B, d, A.field, tol, max_iters, rng)

    # Inverse iteration for the smallest eigenvalue of A*A.
    v = rng.standard_normal(d)
    if A.field == "complex":
        v = v + 1j * rng.standard_normal(d)
    v = v / np.linalg.norm(v)
    lam_min = lam_max
    cg_tol = min(1e-10, tol * 1e-3)
    for it in range(max_iters):
        u = _cg_solve(apply_B, v, cg_tol, 20 * d)
        v = u / np.linalg.norm(u)
        lam_new = float(np.real(np.vdot(v, apply_B(v))))
        if it > 0 and abs(lam_new - lam_min) <= tol * max(abs(lam_new), 1e-300):
            lam_min = lam_new
            break
        lam_min = lam_new
    else:
        raise RuntimeError(
            f"inverse iteration failed to converge to relative tolerance {tol} "
            f"within {max_iters} iterations"
        )
    lam_min = max(lam_min, 0.0)
    return SpectralEstimates(
        sigma_max=float(np.sqrt(max(lam_max, 0.0))),
        sigma_min=float(np.sqrt(lam_min)),
        method="power-iteration",
    )
