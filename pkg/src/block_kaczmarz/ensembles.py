"""Random matrix ensembles for the numerical studies.

Three families:

* ``block-circulant`` -- a vertical stack of partial random circulant
  blocks R F* E_i F (orthonormal rows, fast multiplies, complex field),
  together with its natural one-block-per-circulant paving;
* ``sphere-rows`` -- rows drawn independently and uniformly from the unit
  sphere (incoherent, well conditioned);
* ``coherent`` -- entries uniform on [0.5, 1] with rows normalized, so all
  rows point into the same orthant and are strongly correlated.
"""

from dataclasses import dataclass

import numpy as np

from .linops import DenseMatrix, PartialCirculantStack
from .paving import RowPaving

BLOCK_CIRCULANT = "block-circulant"
SPHERE_ROWS = "sphere-rows"
COHERENT = "coherent"

__all__ = [
    "BLOCK_CIRCULANT",
    "SPHERE_ROWS",
    "COHERENT",
    "EnsembleSpec",
    "gen_block_circulant",
    "gen_sphere_rows",
    "gen_coherent",
    "make_ensemble",
]


@dataclass(frozen=True)
class EnsembleSpec:
    """Which ensemble to draw and at what size.

    For ``block-circulant``, n must equal block_count * rows_per_block
    (defaults 300 = 15 * 20 with d = 100).  ``seed`` is carried as metadata;
    generators take an explicit rng so callers control stream derivation.
    """

    kind: str
    n: int = 300
    d: int = 100
    block_count: int | None = None
    rows_per_block: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in (BLOCK_CIRCULANT, SPHERE_ROWS, COHERENT):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.kind == BLOCK_CIRCULANT:
            bc = self.block_count if self.block_count is not None else 15
            rpb = self.rows_per_block if self.rows_per_block is not None else 20
            object.__setattr__(self, "block_count", bc)
            object.__setattr__(self, "rows_per_block", rpb)
            if self.n != bc * rpb:
                raise ValueError(
                    f"block-circulant needs n = block_count * rows_per_block "
                    f"({bc} * {rpb} != {self.n})"
                )
            if rpb > self.d:
                raise ValueError("rows_per_block cannot exceed d")

    def make_rng(self):
        return np.random.default_rng(self.seed)


def gen_block_circulant(spec, rng):
    """Draw a partial-circulant stack and its natural paving.

    Each block is R F* E_i F with an independent Rademacher diagonal E_i and
    R the restriction to the first rows_per_block coordinates; blocks have
    exactly orthonormal rows, so the natural paving has alpha = beta = 1.
    """
    if spec.kind != BLOCK_CIRCULANT:
        raise ValueError(f"spec is for {spec.kind!r}")
    signs = rng.choice(np.array([-1.0, 1.0]), size=(spec.block_count, spec.d))
    stack = PartialCirculantStack(signs, spec.rows_per_block)
    r = spec.rows_per_block
    blocks = [np.arange(i * r, (i + 1) * r) for i in range(spec.block_count)]
    return stack, RowPaving(spec.n, blocks)


def gen_sphere_rows(spec, rng):
    """Rows drawn independently and uniformly at random from the unit sphere."""
    if spec.kind != SPHERE_ROWS:
        raise ValueError(f"spec is for {spec.kind!r}")
    g = rng.standard_normal((spec.n, spec.d))
    return DenseMatrix(g / np.linalg.norm(g, axis=1, keepdims=True))


def gen_coherent(spec, rng):
    """Unit-norm rows with entries drawn uniform on [0.5, 1] before
    normalization; all rows are strongly correlated."""
    if spec.kind != COHERENT:
        raise ValueError(f"spec is for {spec.kind!r}")
    entries = rng.uniform(0.5, 1.0, size=(spec.n, spec.d))
    return DenseMatrix(entries / np.linalg.norm(entries, axis=1, keepdims=True))


def make_ensemble(spec, rng):
    """Draw (A, natural_paving_or_None) for any ensemble kind."""
    if spec.kind == BLOCK_CIRCULANT:
        return gen_block_circulant(spec, rng)
    if spec.kind == SPHERE_ROWS:
        return gen_sphere_rows(spec, rng), None
    return gen_coherent(spec, rng), None
