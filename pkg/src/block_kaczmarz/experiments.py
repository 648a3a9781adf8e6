"""Multi-trial solver comparisons with flop accounting.

Protocol (matching the numerical studies this package reproduces): draw one
matrix per experiment and fix it; set x_star = (1, ..., 1), b = A x_star,
x_0 = 0; run each algorithm for many independent trials; track the
approximation error ||x_j - x_star|| against model flops and counted flops;
and aggregate min/median/max error over trials on a shared flop grid.

Curves are sampled at logarithmically spaced iterations (at most
``RESID_SAMPLES`` per trial, plus iterations 0 and the final one) and
interpolated onto the grid with log(error) linear in flops; before the first
step the error is held at its initial value, and after a trial stops the
last value is held.  Flops-to-target crossings are found per trial by
inverse interpolation on the same curves.

RNG discipline: the matrix uses stream [master_seed]; trial t of algorithm a
uses stream [master_seed, alg_index, t] with the fixed algorithm indices in
``ALG_INDEX``.  Identically seeded library solves consume identical block
sequences (the ControlState implementation is shared).
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ensembles import BLOCK_CIRCULANT, COHERENT, SPHERE_ROWS, EnsembleSpec, make_ensemble
from .flops import FlopCounter, axpy_flops, dot_flops, flop_model
from .paving import partition_from_permutation
from .solver import (
    CYCLIC_WITHOUT_REPLACEMENT,
    UNIFORM_WITH_REPLACEMENT,
    ControlState,
    _make_handle,
    default_inner_solver,
)

ALG_SIMPLE = "simple"
ALG_BLOCK_WR = "block-with-replacement"
ALG_BLOCK_WOR = "block-without-replacement"
ALG_INDEX = {ALG_SIMPLE: 0, ALG_BLOCK_WR: 1, ALG_BLOCK_WOR: 2}

CSV_HEADER = (
    "algorithm,trial_stat,checkpoint,iter,epoch,"
    "flops_model,flops_counted,wall_ns,err_norm,resid_norm"
)

GRID_POINTS = 128
RESID_SAMPLES = 96
ERR_RESYNC_EVERY = 64  # exact error-norm refresh cadence in the simple loop

__all__ = [
    "ALG_SIMPLE",
    "ALG_BLOCK_WR",
    "ALG_BLOCK_WOR",
    "ALG_INDEX",
    "CSV_HEADER",
    "TrialCurve",
    "TrialAggregate",
    "ComparisonResult",
    "run_comparison",
    "experiment_circulant",
    "experiment_sphere",
    "experiment_coherent",
    "err_at_flops",
    "flops_to_target",
    "emit_csv",
    "parse_csv",
    "parse_config",
    "flop_model",
]


@dataclass
class TrialCurve:
    """One trial's sampled trajectory: parallel arrays over sample points."""

    algorithm: str
    iters: np.ndarray
    flops_model: np.ndarray
    flops_counted: np.ndarray
    wall_ns: np.ndarray
    err: np.ndarray
    resid: np.ndarray
    iters_per_epoch: int
    total_iterations: int
    reached_target: bool


@dataclass
class TrialAggregate:
    """Per-algorithm statistics over trials on the shared flop grid.

    ``checkpoints`` holds the grid values on the comparison axis
    (``axis`` is "model" or "counted"); the companion arrays hold the median
    across trials of the other quantities at each checkpoint, and err_*/
    resid_* hold the min/median/max of the error and residual norms.
    ``crossings`` maps each requested error target to the per-trial flops
    needed to first reach it (NaN when a trial never does).
    """

    algorithm: str
    axis: str
    checkpoints: np.ndarray
    iter_med: np.ndarray
    epoch_med: np.ndarray
    flops_model_med: np.ndarray
    flops_counted_med: np.ndarray
    wall_ns_med: np.ndarray
    err_min: np.ndarray
    err_median: np.ndarray
    err_max: np.ndarray
    resid_min: np.ndarray
    resid_median: np.ndarray
    resid_max: np.ndarray
    trials: int
    crossings: dict = field(default_factory=dict)


@dataclass
class ComparisonResult:
    aggregates: dict  # algorithm -> TrialAggregate
    metadata: dict
    curves: dict = field(default_factory=dict)  # algorithm -> [TrialCurve], opt-in


def _per_alg(value, alg, default=None):
    if isinstance(value, dict):
        return value.get(alg, default)
    return value


def _sample_iterations(max_iters, budget=RESID_SAMPLES):
    """At most ``budget`` log-spaced iteration indices in [1, max_iters]."""
    if max_iters <= budget:
        return np.arange(1, max_iters + 1)
    return np.unique(np.round(np.geomspace(1, max_iters, budget)).astype(np.int64))


def _run_simple_trial(A, b, x_star, rng, err_target, max_iters, samples):
    """One simple-method trial with incremental error tracking.

    The per-step correction magnitude gives the exact decrease of the squared
    error on a consistent problem, so the error is updated incrementally and
    refreshed with an exact norm every ``ERR_RESYNC_EVERY`` iterations and at
    every sample point.
    """
    n, d = A.shape
    dense = A.materialize()
    rows_conj = dense.entries.conj()
    norms_sq = np.real(np.einsum("ij,ij->i", dense.entries, rows_conj))
    dtype = np.complex128 if A.field == "complex" else np.float64
    x = np.zeros(d, dtype=dtype)
    state = ControlState(UNIFORM_WITH_REPLACEMENT, n, rng)
    step_counted = dot_flops(d, A.field) + axpy_flops(d, A.field)
    step_model = flop_model("simple", d)
    err_sq = float(np.real(np.vdot(x - x_star, x - x_star)))
    target_sq = err_target**2
    t0 = time.perf_counter_ns()
    rec_it, rec_wall, rec_err, rec_resid = [0], [0], [math.sqrt(err_sq)], [
        float(np.linalg.norm(A.matvec(x) - b))
    ]
    sample_pos = 0
    reached = err_sq <= target_sq
    j = 0
    while not reached and j < max_iters:
        j += 1
        t = state.next()
        a_t = rows_conj[t]
        c = (b[t] - np.vdot(a_t, x)) / norms_sq[t]
        x += c * a_t
        err_sq -= (c.real * c.real + c.imag * c.imag) * norms_sq[t]
        if j % ERR_RESYNC_EVERY == 0:
            err_sq = float(np.real(np.vdot(x - x_star, x - x_star)))
        at_sample = sample_pos < samples.size and j == samples[sample_pos]
        if at_sample or err_sq <= target_sq:
            err_sq = float(np.real(np.vdot(x - x_star, x - x_star)))
            reached = err_sq <= target_sq
            if at_sample:
                sample_pos += 1
            if at_sample or reached:
                rec_it.append(j)
                rec_wall.append(time.perf_counter_ns() - t0)
                rec_err.append(math.sqrt(max(err_sq, 0.0)))
                rec_resid.append(float(np.linalg.norm(A.matvec(x) - b)))
        # skip sample points the early-exit check already passed
        while sample_pos < samples.size and samples[sample_pos] <= j:
            sample_pos += 1
    if rec_it[-1] != j:
        rec_it.append(j)
        rec_wall.append(time.perf_counter_ns() - t0)
        rec_err.append(float(np.linalg.norm(x - x_star)))
        rec_resid.append(float(np.linalg.norm(A.matvec(x) - b)))
    iters = np.asarray(rec_it, dtype=np.float64)
    return TrialCurve(
        algorithm=ALG_SIMPLE,
        iters=iters,
        flops_model=iters * step_model,
        flops_counted=iters * step_counted,
        wall_ns=np.asarray(rec_wall, dtype=np.float64),
        err=np.asarray(rec_err),
        resid=np.asarray(rec_resid),
        iters_per_epoch=n,
        total_iterations=j,
        reached_target=reached,
    )


def _run_block_trial(algorithm, A, b, x_star, paving, inner, rng, err_target,
                     max_iters, samples):
    """One block-method trial; per-block solve state is fresh per trial."""
    n, d = A.shape
    m = paving.m
    kind = (
        UNIFORM_WITH_REPLACEMENT
        if algorithm == ALG_BLOCK_WR
        else CYCLIC_WITHOUT_REPLACEMENT
    )
    dtype = np.complex128 if A.field == "complex" else np.float64
    x = np.zeros(d, dtype=dtype)
    state = ControlState(kind, m, rng)
    handles = {}
    counter = FlopCounter()
    err = float(np.linalg.norm(x - x_star))
    t0 = time.perf_counter_ns()
    rec_it, rec_model, rec_counted, rec_wall, rec_err, rec_resid = (
        [0],
        [0.0],
        [0.0],
        [0],
        [err],
        [float(np.linalg.norm(A.matvec(x) - b))],
    )
    sample_pos = 0
    reached = err <= err_target
    j = 0
    while not reached and j < max_iters:
        j += 1
        i = state.next()
        if i not in handles:
            handles[i] = _make_handle(A, paving[i], i, inner)
        x, _ = handles[i].visit(x, b[paving[i]], counter)
        err = float(np.linalg.norm(x - x_star))
        reached = err <= err_target
        at_sample = sample_pos < samples.size and j == samples[sample_pos]
        if at_sample:
            sample_pos += 1
        if at_sample or reached:
            rec_it.append(j)
            rec_model.append(counter.model)
            rec_counted.append(counter.counted)
            rec_wall.append(time.perf_counter_ns() - t0)
            rec_err.append(err)
            rec_resid.append(float(np.linalg.norm(A.matvec(x) - b)))
        while sample_pos < samples.size and samples[sample_pos] <= j:
            sample_pos += 1
    if rec_it[-1] != j:
        rec_it.append(j)
        rec_model.append(counter.model)
        rec_counted.append(counter.counted)
        rec_wall.append(time.perf_counter_ns() - t0)
        rec_err.append(err)
        rec_resid.append(float(np.linalg.norm(A.matvec(x) - b)))
    return TrialCurve(
        algorithm=algorithm,
        iters=np.asarray(rec_it, dtype=np.float64),
        flops_model=np.asarray(rec_model),
        flops_counted=np.asarray(rec_counted),
        wall_ns=np.asarray(rec_wall, dtype=np.float64),
        err=np.asarray(rec_err),
        resid=np.asarray(rec_resid),
        iters_per_epoch=m,
        total_iterations=j,
        reached_target=reached,
    )


def _axis_flops(curve, axis):
    return curve.flops_model if axis == "model" else curve.flops_counted


def err_at_flops(curve, flops, axis):
    """Error norm of one trial at a flop budget (log-err linear in flops;
    initial error before the first step, last value held after the end)."""
    f = _axis_flops(curve, axis)
    flops = np.asarray(flops, dtype=np.float64)
    out = np.exp(np.interp(flops, f, np.log(np.maximum(curve.err, 1e-300))))
    if f.size > 1:
        out = np.where(flops < f[1], curve.err[0], out)
    return out if out.ndim else float(out)


def flops_to_target(curve, target, axis):
    """Flops at which one trial's error first reaches ``target`` (NaN if never)."""
    f = _axis_flops(curve, axis)
    e = np.maximum(curve.err, 1e-300)
    below = e <= target
    if not below.any():
        return float("nan")
    k = int(np.argmax(below))
    if k == 0:
        return 0.0
    le_prev, le_k, lt = math.log(e[k - 1]), math.log(e[k]), math.log(target)
    if le_prev <= lt or le_prev == le_k:
        return float(f[k])
    frac = (le_prev - lt) / (le_prev - le_k)
    return float(f[k - 1] + frac * (f[k] - f[k - 1]))


def _aggregate(algorithm, curves, grid, axis, crossing_targets):
    k = grid.size
    t = len(curves)
    err = np.empty((t, k))
    resid = np.empty((t, k))
    iters = np.empty((t, k))
    wall = np.empty((t, k))
    other = np.empty((t, k))
    for row, c in enumerate(curves):
        f = _axis_flops(c, axis)
        err[row] = err_at_flops(c, grid, axis)
        resid[row] = np.exp(np.interp(grid, f, np.log(np.maximum(c.resid, 1e-300))))
        iters[row] = np.interp(grid, f, c.iters)
        wall[row] = np.interp(grid, f, c.wall_ns)
        o = c.flops_counted if axis == "model" else c.flops_model
        other[row] = np.interp(grid, f, o)
        if f.size > 1:
            pre = grid < f[1]
            resid[row][pre] = c.resid[0]
            iters[row][pre] = 0.0
    iters_med = np.median(iters, axis=0)
    epoch_med = np.ceil(iters_med / curves[0].iters_per_epoch)
    other_med = np.median(other, axis=0)
    crossings = {
        float(tgt): np.array([flops_to_target(c, tgt, axis) for c in curves])
        for tgt in crossing_targets
    }
    return TrialAggregate(
        algorithm=algorithm,
        axis=axis,
        checkpoints=grid,
        iter_med=iters_med,
        epoch_med=epoch_med,
        flops_model_med=grid if axis == "model" else other_med,
        flops_counted_med=grid if axis == "counted" else other_med,
        wall_ns_med=np.median(wall, axis=0),
        err_min=err.min(axis=0),
        err_median=np.median(err, axis=0),
        err_max=err.max(axis=0),
        resid_min=resid.min(axis=0),
        resid_median=np.median(resid, axis=0),
        resid_max=resid.max(axis=0),
        trials=t,
        crossings=crossings,
    )


def run_comparison(spec, algorithms, trials=100, checkpoints=None, *,
                   paving=None, err_target=1e-12, crossing_targets=(),
                   max_epochs=200, master_seed=0, keep_curves=False,
                   grid_points=GRID_POINTS, inner=None, axis=None):
    """Run the fixed-matrix multi-trial comparison protocol.

    ``err_target`` and ``max_epochs`` may be a single value or a per-algorithm
    dict.  ``checkpoints`` overrides the automatic log-spaced flop grid.  The
    comparison axis defaults to model flops for the circulant ensemble
    (where the model is the point of the construction) and counted flops
    otherwise.  Returns a ComparisonResult; raw trial curves are retained
    only when ``keep_curves``.
    """
    for alg in algorithms:
        if alg not in ALG_INDEX:
            raise ValueError(f"unknown algorithm {alg!r}")
    if trials < 1:
        raise ValueError("trials must be positive")
    matrix_rng = np.random.default_rng([master_seed])
    A, natural = make_ensemble(spec, matrix_rng)
    if paving is None:
        paving = natural
    needs_paving = any(a != ALG_SIMPLE for a in algorithms)
    if needs_paving and paving is None:
        raise ValueError("block algorithms require a paving for this ensemble")
    if axis is None:
        axis = "model" if spec.kind == BLOCK_CIRCULANT else "counted"
    n, d = A.shape
    dtype = np.complex128 if A.field == "complex" else np.float64
    x_star = np.ones(d, dtype=dtype)
    b = A.matvec(x_star)
    if needs_paving and inner is None:
        inner = default_inner_solver(paving)

    curves = {}
    for alg in algorithms:
        tgt = float(_per_alg(err_target, alg, 1e-12))
        cap = int(_per_alg(max_epochs, alg, 200))
        per_epoch = n if alg == ALG_SIMPLE else paving.m
        max_iters = cap * per_epoch
        samples = _sample_iterations(max_iters)
        runs = []
        for t in range(trials):
            rng = np.random.default_rng([master_seed, ALG_INDEX[alg], t])
            if alg == ALG_SIMPLE:
                runs.append(_run_simple_trial(A, b, x_star, rng, tgt, max_iters, samples))
            else:
                runs.append(
                    _run_block_trial(alg, A, b, x_star, paving, inner, rng, tgt,
                                     max_iters, samples)
                )
        curves[alg] = runs

    if checkpoints is not None:
        grid = np.asarray(checkpoints, dtype=np.float64)
    else:
        firsts = [
            _axis_flops(c, axis)[1]
            for cs in curves.values()
            for c in cs
            if c.iters.size > 1
        ]
        first = min(firsts) if firsts else 1.0
        last = max(_axis_flops(c, axis)[-1] for cs in curves.values() for c in cs)
        grid = np.geomspace(first, max(last, first * (1 + 1e-9)), grid_points)
    aggregates = {
        alg: _aggregate(alg, curves[alg], grid, axis, crossing_targets)
        for alg in algorithms
    }
    metadata = {
        "ensemble": spec.kind,
        "n": n,
        "d": d,
        "blocks": paving.m if paving is not None else None,
        "trials": trials,
        "master_seed": master_seed,
        "algorithms": list(algorithms),
        "alg_indices": {a: ALG_INDEX[a] for a in algorithms},
        "axis": axis,
        "err_target": err_target if not isinstance(err_target, dict) else dict(err_target),
        "max_epochs": max_epochs if not isinstance(max_epochs, dict) else dict(max_epochs),
        "crossing_targets": [float(t) for t in crossing_targets],
        "grid_points": int(grid.size),
        "protocol": "x_star = ones(d), b = A x_star, x0 = 0; one fixed matrix; "
                    "error tracked per iteration",
        "simple_check_note": "the simple method has no per-iteration residual "
                             "checks here; when solved via the CLI its "
                             "convergence cadence is every n iterations",
    }
    result = ComparisonResult(aggregates=aggregates, metadata=metadata)
    if keep_curves:
        result.curves = curves
    return result


def experiment_circulant(trials=100, master_seed=0, keep_curves=False):
    """Partial-circulant stack, all three algorithms, model-flop axis."""
    spec = EnsembleSpec(BLOCK_CIRCULANT, n=300, d=100, block_count=15,
                        rows_per_block=20)
    return run_comparison(
        spec,
        [ALG_SIMPLE, ALG_BLOCK_WR, ALG_BLOCK_WOR],
        trials=trials,
        err_target=1e-12,
        crossing_targets=(1e-11,),
        max_epochs=120,
        master_seed=master_seed,
        keep_curves=keep_curves,
    )


def experiment_sphere(trials=100, master_seed=0, keep_curves=False):
    """Sphere-row matrix with 10 contiguous 30-row blocks, counted-flop axis."""
    spec = EnsembleSpec(SPHERE_ROWS, n=300, d=100)
    paving = partition_from_permutation(np.arange(spec.n), 10)
    return run_comparison(
        spec,
        [ALG_SIMPLE, ALG_BLOCK_WR],
        trials=trials,
        paving=paving,
        err_target=1e-12,
        crossing_targets=(1e-11,),
        max_epochs={ALG_SIMPLE: 300, ALG_BLOCK_WR: 400},
        master_seed=master_seed,
        keep_curves=keep_curves,
    )


def experiment_coherent(trials=100, master_seed=0, keep_curves=True):
    """Coherent matrix: the block method converges, the simple method stalls.

    The simple arm runs to a fixed 50-epoch budget (its counted flops then
    exceed the block method's budget); the block arm stops at error 1e-7.
    Raw curves are kept so error-at-budget comparisons can be made per trial.
    """
    spec = EnsembleSpec(COHERENT, n=300, d=100)
    paving = partition_from_permutation(np.arange(spec.n), 10)
    return run_comparison(
        spec,
        [ALG_SIMPLE, ALG_BLOCK_WR],
        trials=trials,
        paving=paving,
        err_target={ALG_SIMPLE: 0.0, ALG_BLOCK_WR: 1e-7},
        crossing_targets=(1e-6,),
        max_epochs={ALG_SIMPLE: 50, ALG_BLOCK_WR: 60},
        master_seed=master_seed,
        keep_curves=keep_curves,
    )


def _fmt(x):
    return format(float(x), ".17g")


def emit_csv(aggregate, path):
    """Write aggregates as CSV: one row per (algorithm, stat, checkpoint).

    ``aggregate`` may be a TrialAggregate, a list of them, or a whole
    ComparisonResult.  LF line endings, 17-significant-digit floats.
    """
    if isinstance(aggregate, ComparisonResult):
        aggs = list(aggregate.aggregates.values())
    elif isinstance(aggregate, TrialAggregate):
        aggs = [aggregate]
    else:
        aggs = list(aggregate)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for agg in aggs:
            stats = {
                "min": (agg.err_min, agg.resid_min),
                "median": (agg.err_median, agg.resid_median),
                "max": (agg.err_max, agg.resid_max),
            }
            for stat, (err, resid) in stats.items():
                for k in range(agg.checkpoints.size):
                    fh.write(
                        ",".join(
                            (
                                agg.algorithm,
                                stat,
                                _fmt(agg.checkpoints[k]),
                                str(int(round(agg.iter_med[k]))),
                                str(int(agg.epoch_med[k])),
                                _fmt(agg.flops_model_med[k]),
                                _fmt(agg.flops_counted_med[k]),
                                str(int(round(agg.wall_ns_med[k]))),
                                _fmt(err[k]),
                                _fmt(resid[k]),
                            )
                        )
                        + "\n"
                    )


def parse_csv(path):
    """Read an emit_csv file back into a list of typed row dicts."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        names = header.split(",")
        int_cols = {"iter", "epoch", "wall_ns"}
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValueError(f"malformed CSV row: {line!r}")
            row = {}
            for name, value in zip(names, parts):
                if name in ("algorithm", "trial_stat"):
                    row[name] = value
                elif name in int_cols:
                    row[name] = int(value)
                else:
                    row[name] = float(value)
            rows.append(row)
    return rows


_CONFIG_KEYS = {
    "ensemble": str,
    "n": int,
    "d": int,
    "blocks": int,
    "trials": int,
    "seed": int,
    "algorithms": str,
    "tol": float,
    "max_epochs": int,
    "inner": str,
    "cg_tol": float,
}


def parse_config(path):
    """Parse a flat `key = value` experiment configuration file.

    Recognized keys: ensemble, n, d, blocks, trials, seed, algorithms
    (comma-separated), tol, max_epochs, inner, cg_tol.  Blank lines and
    #-comments are ignored; unknown keys are errors.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: bad value {value!r} for {key!r}"
                ) from None
    if "algorithms" in out:
        out["algorithms"] = [a.strip() for a in out["algorithms"].split(",") if a.strip()]
    return out
