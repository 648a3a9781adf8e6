"""Slow, independent reference implementations used to check the library.

Everything here is written from the mathematical definitions with plain
loops (or a different well-known algorithm), deliberately not sharing any
code with ``block_kaczmarz``.  These stay frozen; tests compare the fast
paths against them.
"""

import numpy as np


def naive_dft(x, inverse=False):
    """O(n^2) unitary discrete Fourier transform straight from the sum."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    sign = 1.0 if inverse else -1.0
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        acc = 0.0 + 0.0j
        for k in range(n):
            acc += x[k] * np.exp(sign * 2j * np.pi * j * k / n)
        out[j] = acc / np.sqrt(n)
    return out


def naive_matvec(entries, x):
    """Double-loop matrix-vector product."""
    m, d = entries.shape
    out = np.zeros(m, dtype=np.result_type(entries, x))
    for i in range(m):
        for k in range(d):
            out[i] += entries[i, k] * x[k]
    return out


def naive_gram(entries):
    """Triple-loop Gram matrix E E* of the rows of ``entries``."""
    m = entries.shape[0]
    out = np.zeros((m, m), dtype=np.result_type(entries, entries))
    for i in range(m):
        for j in range(m):
            for k in range(entries.shape[1]):
                out[i, j] += entries[i, k] * np.conj(entries[j, k])
    return out


def power_eig_extremes(H, iters=200000, tol=1e-13):
    """Largest/smallest eigenvalue of a Hermitian PSD matrix by power
    iteration plus a spectral shift (independent of LAPACK)."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    rng = np.random.default_rng(12345)

    def top(M):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.sqrt(np.vdot(v, v).real)
        lam = 0.0
        for _ in range(iters):
            w = M @ v
            norm = np.sqrt(np.vdot(w, w).real)
            if norm == 0.0:
                return 0.0
            v_new = w / norm
            lam_new = np.vdot(v_new, M @ v_new).real
            if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
                return lam_new
            v, lam = v_new, lam_new
        return lam

    hi = top(H)
    # smallest eigenvalue via power iteration on hi*I - H
    lo = hi - top(hi * np.eye(n) - H)
    return max(lo, 0.0), hi


def dense_circulant_block(signs_row, rows, dim):
    """Explicit rows x dim matrix: keep the first ``rows`` coordinates of
    F* diag(signs) F, with F the unitary DFT matrix."""
    j = np.arange(dim)
    F = np.exp(-2j * np.pi * np.outer(j, j) / dim) / np.sqrt(dim)
    M = F.conj().T @ np.diag(signs_row.astype(complex)) @ F
    return M[:rows, :]


def pinv_projection_step(x, block_entries, b_block):
    """Reference block update x + A_tau^+ (b_tau - A_tau x) via SVD pinv."""
    residual = b_block - block_entries @ x
    return x + np.linalg.pinv(block_entries) @ residual


def trial_division_factors(n):
    """Prime factors of n with multiplicity, by trial division."""
    factors = []
    k = 2
    while k * k <= n:
        while n % k == 0:
            factors.append(k)
            n //= k
        k += 1
    if n > 1:
        factors.append(n)
    return factors
