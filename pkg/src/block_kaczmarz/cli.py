"""Command-line front end.

Subcommands: ``solve`` (arbitrary problems from files), ``pave`` (construct
and certify pavings), ``coherence``, ``fit`` (incoherence-transform
pipeline, optionally chained into a solve), ``experiment`` (canned
multi-trial studies; writes CSV, metadata JSON, and a figure), and ``bound``
(theoretical-rate report).

Scalar reports go to stdout as JSON; traces and aggregates are CSV; matrices
are Matrix Market.  Exit codes: 0 success/converged, 1 usage or input error,
2 ran but did not converge.  Whenever ``--seed`` is omitted, a seed is drawn
from OS entropy and recorded in the JSON output so the run can be replayed.
"""

import argparse
import json
import pathlib
import sys

import numpy as np

from . import fileio
from .ensembles import BLOCK_CIRCULANT, COHERENT, SPHERE_ROWS, EnsembleSpec
from .experiments import (
    ALG_INDEX,
    emit_csv,
    experiment_circulant,
    experiment_coherent,
    experiment_sphere,
    parse_config,
    run_comparison,
)
from .linops import sigma_extremes
from .paving import (
    check_fit_hypothesis,
    coherence,
    compute_paving_bounds,
    fit_hypothesis_threshold,
    fit_transform,
    paving_size_for,
    random_partition,
    single_row_paving,
)
from .solver import (
    CYCLIC_WITHOUT_REPLACEMENT,
    DIRECT_GRAM,
    ITERATIVE_CG,
    UNIFORM_WITH_REPLACEMENT,
    ControlScheme,
    InnerSolver,
    LeastSquaresProblem,
    SolverConfig,
    run_block_solver,
    theoretical_bound,
    tolerance_floor,
)

TRACE_HEADER = "iter,epoch,flops_model,flops_counted,wall_ns,resid_norm,err_norm,flag"

_CONTROL = {
    "uniform": UNIFORM_WITH_REPLACEMENT,
    "cycle": CYCLIC_WITHOUT_REPLACEMENT,
}
_INNER = {"direct": DIRECT_GRAM, "cg": ITERATIVE_CG}


def _resolve_seed(seed):
    """(seed, was_drawn): use the given seed, or draw one from OS entropy."""
    if seed is not None:
        return int(seed), False
    return int(np.random.SeedSequence().entropy >> 64), True


def _resolve_paving(spec_text, n, rng):
    """Parse a paving flag: `rows`, `random:M`, or a paving file path."""
    if spec_text == "rows":
        return single_row_paving(n)
    if spec_text.startswith("random:"):
        try:
            m = int(spec_text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad paving spec {spec_text!r}: expected random:M") from None
        if not 1 <= m <= n:
            raise ValueError(f"paving random:{m} invalid for a matrix with {n} rows")
        return random_partition(n, m, rng)
    paving = fileio.load_paving(spec_text)
    if paving.n != n:
        raise ValueError(
            f"paving covers {paving.n} rows but the matrix has {n}"
        )
    return paving


def _inner_from_flag(value, cg_tol=1e-6):
    if value is None:
        return None
    return InnerSolver(_INNER[value], cg_tol=cg_tol)


def _print_json(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in trace:
            err = "" if row.err_norm is None else format(row.err_norm, ".17g")
            fh.write(
                f"{row.iter},{row.epoch},{row.flops_model:.17g},"
                f"{row.flops_counted:.17g},{row.wall_ns},"
                f"{row.resid_norm:.17g},{err},{row.flag}\n"
            )


def cmd_solve(args):
    A = fileio.load_matrix(args.matrix)
    b = fileio.load_vector(args.rhs)
    x_star = fileio.load_vector(args.xstar) if args.xstar else None
    problem = LeastSquaresProblem(A, b, x_star=x_star)
    seed, drawn = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    paving = _resolve_paving(args.paving, A.shape[0], rng)
    config = SolverConfig(
        tolerance=args.tol,
        paving=paving,
        control=ControlScheme(_CONTROL[args.control], seed),
        inner=_inner_from_flag(args.inner),
        max_epochs=args.max_epochs,
    )
    report = run_block_solver(problem, config)
    if args.trace:
        _write_trace(args.trace, report.trace)
    payload = {
        "converged": report.converged,
        "iterations": report.iterations,
        "epochs": report.epochs,
        "residNorm": report.resid_norm,
        "flops": {
            "model": report.trace[-1].flops_model,
            "counted": report.trace[-1].flops_counted,
        },
        "seed": seed,
        "seedDrawn": drawn,
    }
    if report.flags:
        payload["flags"] = report.flags
    _print_json(payload)
    return 0 if report.converged else 2


def cmd_pave(args):
    A = fileio.load_matrix(args.matrix)
    n = A.shape[0]
    seed, drawn = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    if (args.blocks is None) == (args.paving is None):
        raise ValueError("pass exactly one of --blocks or --paving")
    if args.blocks is not None:
        if not 1 <= args.blocks <= n:
            raise ValueError(f"--blocks must lie in [1, {n}] for this matrix")
        paving = random_partition(n, args.blocks, rng)
    else:
        paving = _resolve_paving(args.paving, n, rng)
    bounds = compute_paving_bounds(A, paving)
    if args.out:
        fileio.save_paving(args.out, paving)
    payload = {
        "m": bounds.m,
        "alpha": bounds.alpha,
        "beta": bounds.beta,
        "conditionBound": bounds.condition_bound(),
        "seed": seed,
        "seedDrawn": drawn,
    }
    if bounds.estimated:
        payload["estimated"] = True
    _print_json(payload)
    return 0


def cmd_coherence(args):
    A = fileio.load_matrix(args.matrix)
    report = coherence(A)
    payload = {
        "maxOffDiagonal": report.max_off_diagonal,
        "maxDiagonalDeviation": report.max_diagonal_deviation,
        "argmaxPair": [report.argmax_pair[0] + 1, report.argmax_pair[1] + 1],
        "sampledPairs": report.sampled_pairs,
    }
    _print_json(payload)
    return 0


def cmd_fit(args):
    A = fileio.load_matrix(args.matrix)
    b = fileio.load_vector(args.rhs)
    n, d = A.shape
    seed, drawn = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    signs = np.ones(n) if args.all_plus_signs else None
    W, b_tilde, signs = fit_transform(A, b, rng, signs=signs)
    W_dense = W.materialize()
    prefix = pathlib.Path(args.out_prefix)
    fileio.save_matrix(str(prefix) + ".W.mtx", W_dense)
    fileio.save_vector(str(prefix) + ".rhs.vec", b_tilde)
    fileio.save_vector(str(prefix) + ".signs.vec", signs)
    probe = rng.standard_normal(d)
    preservation = abs(
        float(np.linalg.norm(W.matvec(probe) - b_tilde))
        - float(np.linalg.norm(A.matvec(probe) - b))
    )
    before = coherence(A)
    after = coherence(W_dense)
    sigma_max_sq = float(sigma_extremes(A).sigma_max ** 2)
    payload = {
        "coherenceBefore": before.max_off_diagonal,
        "coherenceAfter": after.max_off_diagonal,
        "objectivePreservationGap": preservation,
        "hypothesisHolds": bool(check_fit_hypothesis(A, args.cfit)),
        "spectralNormSq": sigma_max_sq,
        "spectralNormBudget": fit_hypothesis_threshold(n, args.cfit),
        "seed": seed,
        "seedDrawn": drawn,
        "files": {
            "matrix": str(prefix) + ".W.mtx",
            "rhs": str(prefix) + ".rhs.vec",
            "signs": str(prefix) + ".signs.vec",
        },
    }
    code = 0
    if args.then_solve:
        m = paving_size_for(np.sqrt(sigma_max_sq), n, c_rand=args.crand,
                            delta=args.delta)
        paving = random_partition(n, m, rng)
        problem = LeastSquaresProblem(W_dense, b_tilde)
        config = SolverConfig(
            tolerance=args.tol,
            paving=paving,
            control=ControlScheme(_CONTROL[args.control], seed),
            inner=_inner_from_flag(args.inner),
            max_epochs=args.max_epochs,
        )
        report = run_block_solver(problem, config)
        payload["solve"] = {
            "converged": report.converged,
            "iterations": report.iterations,
            "epochs": report.epochs,
            "residNorm": report.resid_norm,
            "flops": {
                "model": report.trace[-1].flops_model,
                "counted": report.trace[-1].flops_counted,
            },
            "pavingBlocks": m,
            "crand": args.crand,
            "delta": args.delta,
        }
        code = 0 if report.converged else 2
    _print_json(payload)
    return code


def _experiment_from_config(path, trials, seed):
    cfg = parse_config(path)
    kind = cfg.get("ensemble")
    aliases = {
        "circulant": BLOCK_CIRCULANT,
        BLOCK_CIRCULANT: BLOCK_CIRCULANT,
        "sphere": SPHERE_ROWS,
        SPHERE_ROWS: SPHERE_ROWS,
        "coherent": COHERENT,
        COHERENT: COHERENT,
    }
    if kind not in aliases:
        raise ValueError(f"config has unknown ensemble {kind!r}")
    kind = aliases[kind]
    n = cfg.get("n", 300)
    d = cfg.get("d", 100)
    blocks = cfg.get("blocks", 15 if kind == BLOCK_CIRCULANT else 10)
    if kind == BLOCK_CIRCULANT:
        if n % blocks != 0:
            raise ValueError("circulant config needs blocks dividing n")
        spec = EnsembleSpec(kind, n=n, d=d, block_count=blocks,
                            rows_per_block=n // blocks)
        paving = None
    else:
        spec = EnsembleSpec(kind, n=n, d=d)
        paving = random_partition(n, blocks, np.random.default_rng(cfg.get("seed", 0)))
    algorithms = cfg.get("algorithms", list(ALG_INDEX))
    inner = _inner_from_flag(cfg.get("inner"), cfg.get("cg_tol", 1e-6))
    return run_comparison(
        spec,
        algorithms,
        trials=trials if trials is not None else cfg.get("trials", 100),
        paving=paving,
        err_target=cfg.get("tol", 1e-12),
        crossing_targets=(cfg.get("tol", 1e-12) * 10,),
        max_epochs=cfg.get("max_epochs", 200),
        master_seed=seed if seed is not None else cfg.get("seed", 0),
        inner=inner,
    )


def cmd_experiment(args):
    if (args.name is None) == (args.config is None):
        raise ValueError("pass exactly one of --name or --config")
    seed, drawn = _resolve_seed(args.seed)
    if args.config:
        result = _experiment_from_config(args.config, args.trials, seed)
    else:
        canned = {
            "circulant": experiment_circulant,
            "sphere": experiment_sphere,
            "coherent": experiment_coherent,
        }
        if args.name not in canned:
            raise ValueError(f"unknown experiment {args.name!r}")
        trials = args.trials if args.trials is not None else 100
        result = canned[args.name](trials=trials, master_seed=seed)
    out = pathlib.Path(args.out)
    emit_csv(result, out)
    result.metadata["seedDrawn"] = drawn
    meta_path = out.with_suffix(".meta.json")
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files = {"csv": str(out), "metadata": str(meta_path)}
    if not args.no_figures:
        from .figures import plot_comparison

        fig_path = out.with_suffix(".png")
        plot_comparison(result, fig_path)
        files["figure"] = str(fig_path)
    _print_json({"written": files, "seed": seed, "seedDrawn": drawn})
    return 0


def cmd_bound(args):
    A = fileio.load_matrix(args.matrix)
    n = A.shape[0]
    seed, drawn = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    paving = _resolve_paving(args.paving, n, rng)
    bounds = compute_paving_bounds(A, paving)
    est = sigma_extremes(A)
    sigma_min_sq = est.sigma_min**2
    e_norm = args.residual_norm
    payload = {
        "sigmaMinSq": sigma_min_sq,
        "m": bounds.m,
        "alpha": bounds.alpha,
        "beta": bounds.beta,
        "contraction": 1.0 - sigma_min_sq / (bounds.beta * bounds.m),
        "simpleRate": sigma_min_sq / n,
        "speedup": n / (bounds.beta * bounds.m),
        "seed": seed,
        "seedDrawn": drawn,
    }
    if bounds.alpha > 0 and sigma_min_sq > 0:
        payload["horizon"] = (
            (bounds.beta / bounds.alpha) * e_norm**2 / sigma_min_sq
        )
        payload["toleranceFloorSq"] = tolerance_floor(bounds, e_norm**2)
    else:
        payload["horizon"] = None
        payload["horizonNote"] = "unavailable: alpha = 0 or sigma_min = 0"
    if args.residual_inf_norm is not None and sigma_min_sq > 0:
        payload["simpleHorizonInfNorm"] = (
            n * args.residual_inf_norm**2 / sigma_min_sq
        )
    if args.err0 is not None and bounds.alpha > 0 and sigma_min_sq > 0:
        js = [0, 1, 2, 5, 10, 20, 50, 100]
        payload["boundCurve"] = {
            "j": js,
            "value": [
                theoretical_bound(j, sigma_min_sq, bounds, args.err0**2,
                                  e_norm**2)
                for j in js
            ],
        }
    _print_json(payload)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="block-kaczmarz",
        description="Randomized block Kaczmarz least-squares solver with row "
                    "pavings: solve, pave, coherence, fit, experiment, bound.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a least-squares problem from files")
    p.add_argument("--matrix", required=True, help="Matrix Market file")
    p.add_argument("--rhs", required=True, help="right-hand side vector file")
    p.add_argument("--paving", required=True,
                   help="paving file path, random:M, or rows")
    p.add_argument("--control", choices=sorted(_CONTROL), default="uniform")
    p.add_argument("--inner", choices=sorted(_INNER), default=None,
                   help="inner solver (default: by block size)")
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", default=None, help="write per-check trace CSV here")
    p.add_argument("--xstar", default=None,
                   help="known minimizer vector file (enables error tracking)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pave", help="construct and certify a row paving")
    p.add_argument("--matrix", required=True)
    p.add_argument("--blocks", type=int, default=None,
                   help="draw a random partition with this many blocks")
    p.add_argument("--paving", default=None,
                   help="certify an existing paving (file, random:M, or rows)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write the paving file here")
    p.set_defaults(func=cmd_pave)

    p = sub.add_parser("coherence", help="report the row coherence of a matrix")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("fit", help="apply the fast incoherence transform")
    p.add_argument("--matrix", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--all-plus-signs", action="store_true",
                   help="use the deterministic all-ones sign pattern")
    p.add_argument("--cfit", type=float, default=1.0,
                   help="constant in the spectral-norm hypothesis")
    p.add_argument("--then-solve", action="store_true",
                   help="chain: transform, random partition, block solve")
    p.add_argument("--crand", type=float, default=1.0,
                   help="partition-size constant for --then-solve")
    p.add_argument("--delta", type=float, default=0.5,
                   help="partition-size slack for --then-solve")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--control", choices=sorted(_CONTROL), default="uniform")
    p.add_argument("--inner", choices=sorted(_INNER), default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", help="run a canned multi-trial study")
    p.add_argument("--name", choices=["circulant", "sphere", "coherent"],
                   default=None)
    p.add_argument("--config", default=None,
                   help="flat key=value experiment configuration file")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="aggregate CSV path")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the PNG figure")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bound", help="evaluate the theoretical convergence rate")
    p.add_argument("--matrix", required=True)
    p.add_argument("--paving", required=True,
                   help="paving file path, random:M, or rows")
    p.add_argument("--err0", type=float, default=None,
                   help="initial error norm, enables a bound-vs-j table")
    p.add_argument("--residual-norm", type=float, default=0.0,
                   help="||e|| at the minimizer (0 for consistent systems)")
    p.add_argument("--residual-inf-norm", type=float, default=None,
                   help="||e||_inf, enables the simple-method horizon report")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bound)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
