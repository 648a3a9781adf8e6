"""Flop accounting: closed-form per-primitive operation counts.

Two figures are tracked throughout the package:

* ``model`` flops: analytic per-step cost formulas used on the benchmark
  plots, kept in the natural units of the problem field (complex flops for
  complex problems).  Only the simple row step and the structured circulant
  block step have such formulas; every other kind of step reports its
  counted figure as the model.
* ``counted`` flops: real-flop equivalents accumulated from the table below.
  A scalar multiply-add pair counts as 2 flops.  A complex multiply costs 6
  real flops and a complex add costs 2, so a complex multiply-add pair costs
  8 -- four times its real counterpart (see :func:`field_factor`).

Counted flops cover the arithmetic a solver performs while iterating,
including first-visit block factorizations.  Problem setup (generating or
materializing a matrix), convergence checks, and diagnostic error tracking
are instrumentation, not solver work, and are excluded.  FFT work is counted
with a deterministic mixed-radix formula rather than introspecting the FFT
library, so counts are bitwise reproducible across platforms.
"""

import math

__all__ = [
    "FlopCounter",
    "field_factor",
    "dot_flops",
    "axpy_flops",
    "gemv_flops",
    "gram_flops",
    "cholesky_flops",
    "tri_solve_flops",
    "cg_iter_flops",
    "fft_flops",
    "flop_model",
]


def field_factor(field):
    """Real-flop multiplier for one multiply-add pair in the given field."""
    if field == "real":
        return 1
    if field == "complex":
        return 4
    raise ValueError(f"unknown scalar field: {field!r}")


def dot_flops(k, field="real"):
    """Inner product of two length-k vectors: k multiply-add pairs."""
    return 2 * k * field_factor(field)


def axpy_flops(k, field="real"):
    """y += s*x on length-k vectors: k multiply-add pairs."""
    return 2 * k * field_factor(field)


def gemv_flops(m, n, field="real"):
    """Dense (m x n) matrix-vector product."""
    return 2 * m * n * field_factor(field)


def gram_flops(p, d, field="real"):
    """Forming the p x p Gram matrix of a p x d block."""
    return 2 * p * p * d * field_factor(field)


def cholesky_flops(p, field="real"):
    """Cholesky factorization of a p x p Hermitian matrix: p^3/3 pairs."""
    return (2.0 / 3.0) * p ** 3 * field_factor(field)


def tri_solve_flops(p, field="real"):
    """One triangular solve with a p x p factor: p^2/2 pairs."""
    return p * p * field_factor(field)


def cg_iter_flops(p, field="real"):
    """One conjugate-gradient iteration on a dense p x p system."""
    return (2 * p * p + 10 * p) * field_factor(field)


def _prime_factors(n):
    """Prime factorization of n with multiplicity, ascending."""
    factors = []
    f = 2
    while f * f <= n:
        while n % f == 0:
            factors.append(f)
            n //= f
        f += 1
    if n > 1:
        factors.append(n)
    return factors


def fft_flops(n):
    """Counted real flops for one length-n FFT (or inverse FFT) on complex data.

    Deterministic mixed-radix model: a radix-p stage performs n*(p-1) complex
    multiply-add pairs, 8 real flops each, summed over the prime factorization
    of n.  (For n = 1 the transform is the identity: 0 flops.)
    """
    if n < 1:
        raise ValueError("fft length must be >= 1")
    return 8 * n * sum(p - 1 for p in _prime_factors(n))


def flop_model(step_kind, d):
    """Analytic per-step flop model.

    ``simple``: one row projection against a stored row costs 4d flops
    (length-d dot plus length-d axpy), in the field's own flop units.

    ``circulant-block``: one block projection implemented with two forward
    and two inverse length-d FFTs costs 4*d*log2(d) + 4*d complex flops;
    log2(d) is evaluated exactly, so the value is generally not an integer.

    Steps without an analytic model report their counted figure instead; see
    the module docstring.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if step_kind == "simple":
        return 4.0 * d
    if step_kind == "circulant-block":
        return 4.0 * d * math.log2(d) + 4.0 * d
    raise ValueError(f"no flop model for step kind {step_kind!r}")


class FlopCounter:
    """Accumulates model and counted flops for one solve."""

    __slots__ = ("model", "counted")

    def __init__(self):
        self.model = 0.0
        self.counted = 0.0

    def add(self, counted, model=None):
        """Add counted flops; model defaults to the counted figure."""
        self.counted += counted
        self.model += counted if model is None else model

    def __repr__(self):
        return f"FlopCounter(model={self.model!r}, counted={self.counted!r})"
