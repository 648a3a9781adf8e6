import math

import numpy as np
import pytest

from block_kaczmarz import experiments as xp
from block_kaczmarz import solver
from block_kaczmarz.ensembles import (
    BLOCK_CIRCULANT,
    COHERENT,
    SPHERE_ROWS,
    EnsembleSpec,
)
from block_kaczmarz.linops import DenseMatrix
from block_kaczmarz.paving import partition_from_permutation, random_partition


def sphere_rows(n, d, seed):
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((n, d))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    return DenseMatrix(E)


def synthetic_curve():
    return xp.TrialCurve(
        algorithm=xp.ALG_SIMPLE,
        iters=np.array([0.0, 1.0, 2.0, 4.0]),
        flops_model=np.array([0.0, 10.0, 20.0, 40.0]),
        flops_counted=np.array([0.0, 40.0, 80.0, 160.0]),
        wall_ns=np.array([0.0, 1.0, 2.0, 4.0]),
        err=np.array([1.0, 0.1, 0.01, 1e-4]),
        resid=np.array([1.0, 0.1, 0.01, 1e-4]),
        iters_per_epoch=2,
        total_iterations=4,
        reached_target=True,
    )


# ------------------------------------------------------- sampling & interp


def test_sample_iterations_small_budget_is_every_iteration():
    s = xp._sample_iterations(10)
    assert np.array_equal(s, np.arange(1, 11))


def test_sample_iterations_log_spaced():
    s = xp._sample_iterations(100_000)
    assert s.size <= xp.RESID_SAMPLES
    assert s[0] == 1 and s[-1] == 100_000
    assert np.all(np.diff(s) > 0)


def test_err_at_flops_interpolates_in_log_space():
    c = synthetic_curve()
    assert xp.err_at_flops(c, 10.0, "model") == pytest.approx(0.1, rel=1e-12)
    assert xp.err_at_flops(c, 30.0, "model") == pytest.approx(1e-3, rel=1e-12)
    # before the first step the initial error is held
    assert xp.err_at_flops(c, 5.0, "model") == 1.0
    # beyond the last record the final value is held
    assert xp.err_at_flops(c, 1e6, "model") == pytest.approx(1e-4, rel=1e-12)
    # the counted axis uses the counted column
    assert xp.err_at_flops(c, 120.0, "counted") == pytest.approx(1e-3, rel=1e-12)
    # vectorized evaluation matches scalar evaluation
    grid = np.array([5.0, 10.0, 30.0])
    out = xp.err_at_flops(c, grid, "model")
    assert np.allclose(out, [1.0, 0.1, 1e-3], rtol=1e-12)


def test_flops_to_target_inverse_interpolation():
    c = synthetic_curve()
    assert xp.flops_to_target(c, 0.1, "model") == pytest.approx(10.0)
    assert xp.flops_to_target(c, 1e-3, "model") == pytest.approx(30.0)
    frac = math.log(1 / 0.5) / math.log(1 / 0.1)
    assert xp.flops_to_target(c, 0.5, "model") == pytest.approx(10.0 * frac)
    # already at the target before any work
    assert xp.flops_to_target(c, 1.0, "model") == 0.0
    # never reached
    assert math.isnan(xp.flops_to_target(c, 1e-9, "model"))


# --------------------------------------------------------- run_comparison


@pytest.fixture(scope="module")
def small_comparison():
    spec = EnsembleSpec(SPHERE_ROWS, n=30, d=6)
    paving = partition_from_permutation(np.arange(30), 3)
    return xp.run_comparison(
        spec,
        [xp.ALG_SIMPLE, xp.ALG_BLOCK_WR, xp.ALG_BLOCK_WOR],
        trials=3,
        paving=paving,
        err_target=1e-10,
        crossing_targets=(1e-8,),
        max_epochs=2000,
        master_seed=11,
        keep_curves=True,
    )


def test_comparison_structure_and_metadata(small_comparison):
    res = small_comparison
    assert set(res.aggregates) == {
        xp.ALG_SIMPLE,
        xp.ALG_BLOCK_WR,
        xp.ALG_BLOCK_WOR,
    }
    meta = res.metadata
    assert meta["ensemble"] == SPHERE_ROWS
    assert (meta["n"], meta["d"], meta["blocks"]) == (30, 6, 3)
    assert meta["trials"] == 3
    assert meta["axis"] == "counted"
    assert "x_star = ones(d)" in meta["protocol"]
    for alg, agg in res.aggregates.items():
        assert agg.trials == 3
        assert agg.axis == "counted"
        assert agg.checkpoints.size == xp.GRID_POINTS
        assert np.all(np.diff(agg.checkpoints) > 0)
        assert np.array_equal(agg.flops_counted_med, agg.checkpoints)
        assert len(res.curves[alg]) == 3


def test_comparison_band_ordering_is_exact(small_comparison):
    for agg in small_comparison.aggregates.values():
        assert np.all(agg.err_min <= agg.err_median)
        assert np.all(agg.err_median <= agg.err_max)
        assert np.all(agg.resid_min <= agg.resid_median)
        assert np.all(agg.resid_median <= agg.resid_max)


def test_comparison_median_error_decreases_after_smoothing(small_comparison):
    for agg in small_comparison.aggregates.values():
        e = agg.err_median
        smooth = np.array(
            [np.median(e[max(k - 1, 0) : k + 2]) for k in range(e.size)]
        )
        assert np.all(np.diff(smooth) <= 1e-9 * smooth[:-1] + 1e-300)


def test_comparison_epochs_follow_iterations(small_comparison):
    for alg, agg in small_comparison.aggregates.items():
        per = 30 if alg == xp.ALG_SIMPLE else 3
        assert np.array_equal(agg.epoch_med, np.ceil(agg.iter_med / per))
        assert np.all(np.diff(agg.iter_med) >= 0)


def test_comparison_trials_reach_target(small_comparison):
    for alg, curves in small_comparison.curves.items():
        for c in curves:
            assert c.reached_target
            assert c.err[-1] <= 1e-10
            assert c.iters[0] == 0 and c.err[0] == pytest.approx(np.sqrt(6.0))


def test_comparison_crossings(small_comparison):
    for agg in small_comparison.aggregates.values():
        assert set(agg.crossings) == {1e-8}
        vals = agg.crossings[1e-8]
        assert vals.shape == (3,)
        assert np.all(np.isfinite(vals)) and np.all(vals > 0)


def test_comparison_is_deterministic():
    spec = EnsembleSpec(SPHERE_ROWS, n=20, d=4)
    paving = partition_from_permutation(np.arange(20), 4)
    kwargs = dict(
        trials=2,
        paving=paving,
        err_target=1e-6,
        max_epochs=500,
        master_seed=3,
    )
    a = xp.run_comparison(spec, [xp.ALG_BLOCK_WR], **kwargs)
    b = xp.run_comparison(spec, [xp.ALG_BLOCK_WR], **kwargs)
    ga = a.aggregates[xp.ALG_BLOCK_WR]
    gb = b.aggregates[xp.ALG_BLOCK_WR]
    assert np.array_equal(ga.checkpoints, gb.checkpoints)
    assert np.array_equal(ga.err_median, gb.err_median)
    assert np.array_equal(ga.resid_max, gb.resid_max)
    assert np.array_equal(ga.iter_med, gb.iter_med)
    assert np.array_equal(ga.crossings == {}, gb.crossings == {})


def test_comparison_axis_override_and_validation():
    spec = EnsembleSpec(SPHERE_ROWS, n=12, d=3)
    paving = partition_from_permutation(np.arange(12), 3)
    res = xp.run_comparison(
        spec,
        [xp.ALG_BLOCK_WR],
        trials=1,
        paving=paving,
        err_target=1e-4,
        max_epochs=500,
        axis="model",
    )
    agg = res.aggregates[xp.ALG_BLOCK_WR]
    assert agg.axis == "model"
    assert np.array_equal(agg.flops_model_med, agg.checkpoints)

    with pytest.raises(ValueError):
        xp.run_comparison(spec, ["gradient-descent"], trials=1)
    with pytest.raises(ValueError):
        xp.run_comparison(spec, [xp.ALG_SIMPLE], trials=0)
    with pytest.raises(ValueError):
        xp.run_comparison(spec, [xp.ALG_BLOCK_WR], trials=1)  # no paving


# ------------------------------- experiment loop vs. library solver twins


def test_simple_trial_matches_simple_solver_stream():
    A = sphere_rows(12, 4, seed=77)
    x_star = np.ones(4)
    b = A.entries @ x_star
    samples = xp._sample_iterations(48)
    curve = xp._run_simple_trial(
        A, b, x_star, np.random.default_rng([7, 0, 2]), 0.0, 48, samples
    )
    prob = solver.LeastSquaresProblem(A, b, x_star=x_star)
    config = solver.SolverConfig(
        tolerance=1e-300,
        control=solver.ControlScheme(seed=[7, 0, 2]),
        max_epochs=4,
    )
    report = solver.run_simple_solver(prob, config)
    assert report.iterations == curve.total_iterations == 48
    assert float(np.linalg.norm(report.x_hat - x_star)) == curve.err[-1]
    assert prob.residual_norm(report.x_hat) == curve.resid[-1]
    assert report.trace[-1].flops_counted == curve.flops_counted[-1]
    assert report.trace[-1].flops_model == curve.flops_model[-1]


def test_block_trial_matches_block_solver_stream():
    A = sphere_rows(15, 5, seed=78)
    x_star = np.ones(5)
    b = A.entries @ x_star
    paving = random_partition(15, 3, np.random.default_rng(1))
    inner = solver.InnerSolver(solver.DIRECT_GRAM)
    samples = xp._sample_iterations(15)
    curve = xp._run_block_trial(
        xp.ALG_BLOCK_WR,
        A,
        b,
        x_star,
        paving,
        inner,
        np.random.default_rng([7, 1, 3]),
        0.0,
        15,
        samples,
    )
    prob = solver.LeastSquaresProblem(A, b, x_star=x_star)
    config = solver.SolverConfig(
        tolerance=1e-300,
        paving=paving,
        control=solver.ControlScheme(seed=[7, 1, 3]),
        inner=inner,
        max_epochs=5,
    )
    report = solver.run_block_solver(prob, config)
    assert report.iterations == curve.total_iterations == 15
    assert float(np.linalg.norm(report.x_hat - x_star)) == curve.err[-1]
    assert prob.residual_norm(report.x_hat) == curve.resid[-1]
    assert report.trace[-1].flops_counted == curve.flops_counted[-1]
    assert report.trace[-1].flops_model == curve.flops_model[-1]


# --------------------------------------------------------------- canned


def test_canned_experiments_smoke():
    circ = xp.experiment_circulant(trials=1)
    assert circ.metadata["ensemble"] == BLOCK_CIRCULANT
    assert circ.metadata["axis"] == "model"
    assert circ.curves == {}
    assert set(circ.aggregates) == {
        xp.ALG_SIMPLE,
        xp.ALG_BLOCK_WR,
        xp.ALG_BLOCK_WOR,
    }

    coh = xp.experiment_coherent(trials=1)
    assert coh.metadata["ensemble"] == COHERENT
    assert coh.metadata["axis"] == "counted"
    assert set(coh.curves) == {xp.ALG_SIMPLE, xp.ALG_BLOCK_WR}

    sph = xp.experiment_sphere(trials=1, keep_curves=True)
    assert sph.metadata["ensemble"] == SPHERE_ROWS
    assert sph.metadata["blocks"] == 10
    assert set(sph.curves) == {xp.ALG_SIMPLE, xp.ALG_BLOCK_WR}


# ------------------------------------------------------------ CSV and config


def test_emit_csv_round_trip(tmp_path, small_comparison):
    path = tmp_path / "agg.csv"
    xp.emit_csv(small_comparison, path)
    rows = xp.parse_csv(path)
    assert len(rows) == 3 * 3 * xp.GRID_POINTS
    agg = small_comparison.aggregates[xp.ALG_SIMPLE]
    first = rows[0]
    assert first["algorithm"] == xp.ALG_SIMPLE
    assert first["trial_stat"] == "min"
    assert first["checkpoint"] == agg.checkpoints[0]
    assert first["err_norm"] == agg.err_min[0]
    assert isinstance(first["iter"], int) and isinstance(first["wall_ns"], int)
    med = rows[xp.GRID_POINTS]
    assert med["trial_stat"] == "median"
    assert med["err_norm"] == agg.err_median[0]
    with open(path, "rb") as fh:
        data = fh.read()
    assert b"\r" not in data


def test_emit_csv_empty_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    xp.emit_csv([], path)
    assert path.read_text() == xp.CSV_HEADER + "\n"
    assert xp.parse_csv(path) == []


def test_parse_csv_rejects_malformed_files(tmp_path):
    bad_header = tmp_path / "bad1.csv"
    bad_header.write_text("nope\n")
    with pytest.raises(ValueError, match="header"):
        xp.parse_csv(bad_header)
    bad_row = tmp_path / "bad2.csv"
    bad_row.write_text(xp.CSV_HEADER + "\nsimple,min,1.0\n")
    with pytest.raises(ValueError, match="malformed"):
        xp.parse_csv(bad_row)


def test_parse_config_types_and_errors(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "# comparison setup\n"
        "ensemble = sphere-rows\n"
        "n = 300\n"
        "d = 100   # columns\n"
        "blocks = 10\n"
        "trials = 5\n"
        "seed = 42\n"
        "algorithms = simple, block-with-replacement\n"
        "tol = 1e-9\n"
        "\n"
        "max_epochs = 50\n"
        "inner = direct\n"
        "cg_tol = 1e-6\n"
    )
    out = xp.parse_config(cfg)
    assert out["ensemble"] == "sphere-rows"
    assert out["n"] == 300 and out["d"] == 100 and out["blocks"] == 10
    assert out["trials"] == 5 and out["seed"] == 42
    assert out["algorithms"] == ["simple", "block-with-replacement"]
    assert out["tol"] == 1e-9 and out["cg_tol"] == 1e-6
    assert out["max_epochs"] == 50 and out["inner"] == "direct"

    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("colour = blue\n")
    with pytest.raises(ValueError, match="unknown key"):
        xp.parse_config(unknown)

    bad_value = tmp_path / "badval.cfg"
    bad_value.write_text("n = many\n")
    with pytest.raises(ValueError, match="bad value"):
        xp.parse_config(bad_value)

    no_eq = tmp_path / "noeq.cfg"
    no_eq.write_text("just words\n")
    with pytest.raises(ValueError, match="key = value"):
        xp.parse_config(no_eq)
