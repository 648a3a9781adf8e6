import numpy as np
import pytest

from block_kaczmarz import ensembles
from block_kaczmarz.paving import coherence, compute_paving_bounds


def test_spec_validation():
    with pytest.raises(ValueError):
        ensembles.EnsembleSpec("gaussian")
    with pytest.raises(ValueError):
        ensembles.EnsembleSpec(ensembles.SPHERE_ROWS, n=0)
    with pytest.raises(ValueError):
        ensembles.EnsembleSpec(ensembles.BLOCK_CIRCULANT, n=299)
    with pytest.raises(ValueError):
        ensembles.EnsembleSpec(
            ensembles.BLOCK_CIRCULANT, n=30, d=5, block_count=3, rows_per_block=10
        )


def test_circulant_spec_defaults():
    spec = ensembles.EnsembleSpec(ensembles.BLOCK_CIRCULANT)
    assert (spec.n, spec.d) == (300, 100)
    assert (spec.block_count, spec.rows_per_block) == (15, 20)


def test_block_circulant_natural_paving_is_orthonormal():
    spec = ensembles.EnsembleSpec(
        ensembles.BLOCK_CIRCULANT, n=60, d=20, block_count=6, rows_per_block=10
    )
    stack, paving = ensembles.gen_block_circulant(spec, np.random.default_rng(0))
    assert stack.shape == (60, 20)
    assert paving.m == 6
    assert [list(b) for b in paving] == [
        list(range(i * 10, (i + 1) * 10)) for i in range(6)
    ]
    bounds = compute_paving_bounds(stack, paving)
    assert bounds.alpha == pytest.approx(1.0, abs=1e-10)
    assert bounds.beta == pytest.approx(1.0, abs=1e-10)
    # every row of the stack has unit norm
    D = stack.materialize().entries
    assert np.allclose(np.linalg.norm(D, axis=1), 1.0, atol=1e-12)


def test_sphere_rows_are_unit_norm_and_isotropic():
    spec = ensembles.EnsembleSpec(ensembles.SPHERE_ROWS, n=10_000, d=8)
    A = ensembles.gen_sphere_rows(spec, np.random.default_rng(1))
    assert A.standardized
    norms = np.linalg.norm(A.entries, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-12
    # each coordinate of a uniform sphere point has mean 0, variance 1/d
    means = A.entries.mean(axis=0)
    se = np.sqrt(1.0 / 8 / 10_000)
    assert np.max(np.abs(means)) <= 5 * se


def test_sphere_spectral_norm_scale():
    spec = ensembles.EnsembleSpec(ensembles.SPHERE_ROWS, n=300, d=100)
    A = ensembles.gen_sphere_rows(spec, np.random.default_rng(2))
    sig = np.linalg.norm(A.entries, 2)
    # within ten percent of the (1 + sqrt(d/n)) sqrt(n/d) aspect-ratio law
    expect = (1.0 + np.sqrt(100 / 300)) * np.sqrt(300 / 100)
    assert abs(sig - expect) <= 0.1 * expect


def test_coherent_rows_all_point_into_the_same_orthant():
    spec = ensembles.EnsembleSpec(ensembles.COHERENT, n=300, d=100)
    A = ensembles.gen_coherent(spec, np.random.default_rng(3))
    assert A.standardized
    assert np.all(A.entries > 0)
    rep = coherence(A)
    assert rep.max_off_diagonal >= 0.95
    # nearly rank one: top singular value close to sqrt(n)
    sig = np.linalg.norm(A.entries, 2)
    assert abs(sig - np.sqrt(300)) <= 0.1 * np.sqrt(300)


def test_coherent_entries_match_the_declared_draw():
    spec = ensembles.EnsembleSpec(ensembles.COHERENT, n=40, d=7)
    A = ensembles.gen_coherent(spec, np.random.default_rng(4))
    raw = np.random.default_rng(4).uniform(0.5, 1.0, size=(40, 7))
    assert np.array_equal(
        A.entries, raw / np.linalg.norm(raw, axis=1, keepdims=True)
    )


def test_generators_reject_foreign_specs():
    sphere = ensembles.EnsembleSpec(ensembles.SPHERE_ROWS, n=10, d=4)
    with pytest.raises(ValueError):
        ensembles.gen_coherent(sphere, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ensembles.gen_block_circulant(sphere, np.random.default_rng(0))
    coh = ensembles.EnsembleSpec(ensembles.COHERENT, n=10, d=4)
    with pytest.raises(ValueError):
        ensembles.gen_sphere_rows(coh, np.random.default_rng(0))


def test_make_ensemble_dispatch_and_determinism():
    circ = ensembles.EnsembleSpec(
        ensembles.BLOCK_CIRCULANT, n=40, d=10, block_count=4, rows_per_block=10
    )
    A1, p1 = ensembles.make_ensemble(circ, np.random.default_rng(5))
    A2, p2 = ensembles.make_ensemble(circ, np.random.default_rng(5))
    assert np.array_equal(A1.signs, A2.signs)
    assert p1.m == p2.m == 4

    sphere = ensembles.EnsembleSpec(ensembles.SPHERE_ROWS, n=12, d=5, seed=9)
    B1, nat = ensembles.make_ensemble(sphere, sphere.make_rng())
    B2, _ = ensembles.make_ensemble(sphere, sphere.make_rng())
    assert nat is None
    assert np.array_equal(B1.entries, B2.entries)
