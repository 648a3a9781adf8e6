import numpy as np
import pytest

from block_kaczmarz import fileio
from block_kaczmarz.linops import DenseMatrix, PartialCirculantStack
from block_kaczmarz.paving import RowPaving


def test_matrix_round_trip_real(tmp_path):
    rng = np.random.default_rng(0)
    A = DenseMatrix(rng.standard_normal((5, 3)))
    path = tmp_path / "a.mtx"
    fileio.save_matrix(path, A)
    B = fileio.load_matrix(path)
    assert isinstance(B, DenseMatrix)
    assert np.array_equal(B.entries, A.entries)
    assert B.field == "real"


def test_matrix_round_trip_complex(tmp_path):
    rng = np.random.default_rng(1)
    C = PartialCirculantStack(rng.choice([-1.0, 1.0], size=(2, 8)), 4)
    path = tmp_path / "c.mtx"
    fileio.save_matrix(path, C)
    B = fileio.load_matrix(path)
    assert B.field == "complex"
    assert np.array_equal(B.entries, C.materialize().entries)


def test_vector_round_trip_real(tmp_path):
    v = np.array([1.0, -2.5, 3e-17, 0.1])
    path = tmp_path / "v.vec"
    fileio.save_vector(path, v)
    w = fileio.load_vector(path)
    assert w.dtype == np.float64
    assert np.array_equal(w, v)


def test_vector_round_trip_complex(tmp_path):
    rng = np.random.default_rng(2)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    path = tmp_path / "v.vec"
    fileio.save_vector(path, v)
    w = fileio.load_vector(path)
    assert w.dtype == np.complex128
    assert np.array_equal(w, v)


def test_vector_file_grammar(tmp_path):
    path = tmp_path / "v.vec"
    path.write_text("# a comment\n1.5\n\n-2.5\n")
    assert np.array_equal(fileio.load_vector(path), [1.5, -2.5])

    complex_path = tmp_path / "c.vec"
    complex_path.write_text("1.0 2.0\n-0.5 0.25\n")
    assert np.array_equal(
        fileio.load_vector(complex_path), [1.0 + 2.0j, -0.5 + 0.25j]
    )


def test_vector_errors(tmp_path):
    with pytest.raises(ValueError):
        fileio.save_vector(tmp_path / "m.vec", np.ones((2, 2)))
    empty = tmp_path / "empty.vec"
    empty.write_text("# nothing\n")
    with pytest.raises(ValueError, match="empty"):
        fileio.load_vector(empty)
    tri = tmp_path / "tri.vec"
    tri.write_text("1 2 3\n")
    with pytest.raises(ValueError):
        fileio.load_vector(tri)
    words = tmp_path / "w.vec"
    words.write_text("one\n")
    with pytest.raises(ValueError, match="not a number"):
        fileio.load_vector(words)


def test_paving_round_trip(tmp_path):
    paving = RowPaving(6, [[5, 0], [1, 2], [3, 4]])
    path = tmp_path / "p.paving"
    fileio.save_paving(path, paving)
    text = path.read_text()
    # header `m n`, then 1-based sorted index lines
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    assert lines[0].split() == ["3", "6"]
    assert lines[1].split() == ["1", "6"]
    back = fileio.load_paving(path)
    assert back.n == 6 and back.m == 3
    assert [list(b) for b in back] == [[0, 5], [1, 2], [3, 4]]


def test_paving_errors(tmp_path):
    bad_header = tmp_path / "h.paving"
    bad_header.write_text("3\n1\n2\n3\n")
    with pytest.raises(ValueError, match="m n"):
        fileio.load_paving(bad_header)

    bad_index = tmp_path / "i.paving"
    bad_index.write_text("2 2\n1\nx\n")
    with pytest.raises(ValueError, match="bad index"):
        fileio.load_paving(bad_index)

    short = tmp_path / "s.paving"
    short.write_text("3 4\n1 2\n3 4\n")
    with pytest.raises(ValueError, match="promises"):
        fileio.load_paving(short)

    # 1-based indices outside [1, n] fail RowPaving validation
    out_of_range = tmp_path / "o.paving"
    out_of_range.write_text("1 2\n1 2 3\n")
    with pytest.raises(ValueError):
        fileio.load_paving(out_of_range)
