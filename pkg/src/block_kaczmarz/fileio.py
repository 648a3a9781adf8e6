"""File formats: Matrix Market matrices, plain-text vectors, paving files.

Vectors are one value per line; complex values are written as
`real imag` pairs.  Paving files start with a `m n` header line followed by
one line of space-separated 1-based row indices per block.  All text is
UTF-8 with LF line endings and 17-significant-digit floats, so round trips
are lossless.
"""

import numpy as np
import scipy.io
import scipy.sparse

from .linops import DenseMatrix
from .paving import RowPaving

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_vector",
    "load_vector",
    "save_paving",
    "load_paving",
]


def save_matrix(path, A):
    """Write a matrix (DenseMatrix, operator, or array) in Matrix Market format."""
    if hasattr(A, "materialize"):
        A = A.materialize()
    entries = A.entries if isinstance(A, DenseMatrix) else np.atleast_2d(np.asarray(A))
    scipy.io.mmwrite(str(path), entries, precision=17)


def load_matrix(path):
    """Read a Matrix Market file (array or coordinate, real or complex)."""
    data = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(data):
        data = data.toarray()
    return DenseMatrix(np.asarray(data))


def save_vector(path, v):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if np.iscomplexobj(v):
            for z in v:
                fh.write(f"{z.real:.17g} {z.imag:.17g}\n")
        else:
            for x in v:
                fh.write(f"{x:.17g}\n")


def load_vector(path):
    reals, imags = [], []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if width is None:
                width = len(parts)
            if len(parts) != width or width not in (1, 2):
                raise ValueError(
                    f"{path}:{lineno}: expected {'1 value' if width == 1 else '2 values'} per line"
                )
            try:
                reals.append(float(parts[0]))
                imags.append(float(parts[1]) if width == 2 else 0.0)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    if width is None:
        raise ValueError(f"{path}: empty vector file")
    if width == 2:
        return np.asarray(reals) + 1j * np.asarray(imags)
    return np.asarray(reals)


def save_paving(path, paving):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{paving.m} {paving.n}\n")
        for tau in paving:
            fh.write(" ".join(str(int(i) + 1) for i in tau) + "\n")


def load_paving(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: first line must be `m n`")
        try:
            m, n = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{path}: first line must be `m n`") from None
        blocks = []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                idx = [int(tok) - 1 for tok in line.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad index list") from None
            blocks.append(idx)
    if len(blocks) != m:
        raise ValueError(f"{path}: header promises {m} blocks, found {len(blocks)}")
    return RowPaving(n, blocks)
