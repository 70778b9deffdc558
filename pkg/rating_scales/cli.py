"""Command-line front end: ``python -m rating_scales <command> ...``.

Every command function takes the parsed arguments and returns a result dict with
``status`` "success" or "error"; :func:`main` prints it and maps it to an exit code
(0 success, 1 domain error, 2 usage error).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from rating_scales import config
from rating_scales.errors import RatingScaleError
from rating_scales.models import (
    AnnealSchedule,
    ComposeOptions,
    Dataset,
    GradeRow,
    LogicalVariant,
    MonotonicityVariant,
    Partition,
    RunConfig,
    SolverOptions,
    ValidationConfig,
)
from rating_scales.tools import baseline, dataset, experiments, penalties, qubo, solvers
from rating_scales.tools.scale import grade_table, validate

logger = logging.getLogger("rating_scales.cli")

EXTRAPOLATION_SIZES = [(2000, 9), (20000, 9)]


# --------------- Argument helpers ---------------


def _int_list(text: str) -> List[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _load_dataset(args: argparse.Namespace) -> Dataset:
    if getattr(args, "data", None):
        return dataset.load(args.data)
    if args.n is None:
        raise RatingScaleError("give --data or --n with --defaults")
    return dataset.from_default_positions(args.n, args.defaults or [])


def _compose_options(args: argparse.Namespace) -> ComposeOptions:
    return ComposeOptions(
        logical=LogicalVariant(args.logical),
        monotonicity=MonotonicityVariant.EXACT if args.exact_monotonicity else MonotonicityVariant(args.monotonicity),
        concentration=not args.no_concentration,
        thresholds=not args.no_thresholds,
    )


def _solver_options(args: argparse.Namespace) -> SolverOptions:
    return SolverOptions(
        solver=getattr(args, "solver", "auto"),
        exact_cap=getattr(args, "exact_cap", config.EXACT_SOLVER_CAP),
        schedule=AnnealSchedule(
            t_start=getattr(args, "t_start", None),
            t_end=getattr(args, "t_end", None),
            sweeps=getattr(args, "sweeps", None),
        ),
        restarts=getattr(args, "restarts", config.ANNEAL_RESTARTS),
        refine=not getattr(args, "no_refine", False),
        seed=args.seed,
        workers=args.workers,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        compose=_compose_options(args),
        validation=ValidationConfig(seed=args.seed),
    )


def _build(args: argparse.Namespace):
    ds = _load_dataset(args)
    options = _solver_options(args)
    lay = penalties.layout(
        ds.n, args.m, solvers.layout_options(ds, options, allow_large=args.allow_large)
    )
    weights = penalties.preset_weights(
        args.preset, ds.n, args.m, max(ds.d, 1),
        exact=options.compose.monotonicity == MonotonicityVariant.EXACT,
    )
    return ds, lay, weights, options


def _grade_lines(rows) -> List[str]:
    lines = [f"{'Grade':>5} {'Cardinality':>11} {'Defaults':>8} {'Default rate':>12}"]
    lines += [f"{r.grade:>5} {r.cardinality:>11} {r.defaults:>8} {r.default_rate:>12.6f}" for r in rows]
    return lines


# --------------- Commands ---------------


def cmd_generate(args: argparse.Namespace) -> Dict:
    ds = dataset.generate(args.n, args.fraction, args.seed, with_scores=args.scores)
    result = {"status": "success", "n": ds.n, "d": ds.d, "default_positions": ds.default_positions}
    if args.out:
        result["path"] = str(dataset.save(ds, args.out))
    return result


def cmd_enumerate(args: argparse.Namespace) -> Dict:
    total = baseline.count_configurations(args.n, args.m)
    result = {"status": "success", "n": args.n, "m": args.m, "configurations": total}
    if args.count_only:
        result["text"] = str(total)
        result["plain"] = True
        return result
    if total > args.limit:
        raise RatingScaleError(f"{total:,} partitions exceed --limit {args.limit:,}; use --count-only")
    result["partitions"] = [list(p.cardinalities) for p in baseline.enumerate_partitions(args.n, args.m)]
    return result


def cmd_build(args: argparse.Namespace) -> Dict:
    ds, lay, weights, options = _build(args)
    model = penalties.compose(lay, weights, ds, options.compose)
    result = {
        "status": "success",
        "dimension": model.dimension,
        "terms": model.term_count,
        "layout": lay.model_dump(exclude={"defaults"}),
    }
    if args.out:
        result["path"] = str(qubo.export_model(model, args.out))
    return result


def cmd_solve(args: argparse.Namespace) -> Dict:
    ds, lay, weights, options = _build(args)
    if args.model:
        model = qubo.import_model(args.model)
    else:
        model = penalties.compose(lay, weights, ds, options.compose)
    solved = solvers.solve_model(model, lay, ds, options)
    result = {"status": "success", "result": solved.model_dump(mode="json", exclude={"all_minimizers"})}
    if solved.decoded is not None:
        rows = grade_table(ds, solved.decoded)
        result["grades"] = [r.model_dump() for r in rows]
        result["text"] = "\n".join(
            _grade_lines(rows) + [f"energy {solved.best_energy:.6f}  valid {solved.validity.encoded_valid}"]
        )
    else:
        result["status"] = "error"
        result["error_message"] = "solution is not a staircase: " + "; ".join(solved.diagnosis)
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2), encoding="utf-8")
    return result


def cmd_confusion(args: argparse.Namespace) -> Dict:
    if args.instance:
        n, m, positions = experiments.CONFUSION_INSTANCES[args.instance]
    else:
        if args.n is None or args.m is None:
            raise RatingScaleError("give --instance or --n, --m and --defaults")
        n, m, positions = args.n, args.m, args.defaults or []
    ds = dataset.from_default_positions(n, positions)
    weights = experiments.confusion_weights(n, m, ds.d, args.mu_ratio)
    matrix, rows = experiments.monotonicity_confusion(ds, m, weights)
    result = {"status": "success", "n": n, "m": m, "default_positions": list(positions), **matrix.model_dump()}
    if args.histogram:
        result["histogram"] = str(experiments.write_histogram_csv(rows, args.histogram))
    result["text"] = "\n".join([
        f"{'':16}{'Predicted Neg':>14}{'Predicted Pos':>14}",
        f"{'Actual Negative':16}{matrix.tn:>14}{matrix.fp:>14}",
        f"{'Actual Positive':16}{matrix.fn:>14}{matrix.tp:>14}",
    ])
    return result


def cmd_benchmark(args: argparse.Namespace) -> Dict:
    rows = []
    if args.published:
        rows = baseline.published_rows()
    else:
        for n, m in args.cases:
            ds = dataset.generate(n, args.fraction, args.seed)
            _, row = baseline.brute_force_search(ds, m, baseline.baseline_config(), workers=args.workers)
            rows.append(row)
    result = {"status": "success", "rows": [r.model_dump() for r in rows]}
    if args.out:
        result["path"] = str(baseline.write_benchmark_csv(rows, args.out))
    if args.fit:
        a, b = baseline.fit_power_law(rows)
        result["fit"] = {"a": a, "b": b}
        result["extrapolation"] = [experiments.extrapolate_runtime(a, b, n, m) for n, m in EXTRAPOLATION_SIZES]
    return result


def cmd_validate(args: argparse.Namespace) -> Dict:
    ds = _load_dataset(args)
    p = Partition(cardinalities=tuple(args.partition))
    report = validate(
        ds, p,
        ValidationConfig(
            lambda1=args.lambda1, lambda2=args.lambda2,
            concentration_threshold=args.concentration_threshold, seed=args.seed,
        ),
    )
    result = {"status": "success", "report": report.model_dump()}
    result["text"] = "\n".join(
        _grade_lines(grade_table(ds, p))
        + [f"{k}: {getattr(report, k)}" for k in ("monotonicity", "concentration", "cardinality",
                                                  "heterogeneity", "homogeneity", "h_adj")]
    )
    return result


def cmd_experiment(args: argparse.Namespace) -> Dict:
    if args.case:
        n, m, positions, preset = experiments.PRESET_CASES[args.case]
    else:
        if args.n is None or args.m is None:
            raise RatingScaleError("give --case or --n, --m and --defaults")
        n, m, positions, preset = args.n, args.m, args.defaults or [], args.preset
    report = experiments.run_preset_experiment(n, m, positions, preset, _solver_options(args))
    if report["grades"]:
        if args.out:
            report["grades_csv"] = str(experiments.write_grade_table_csv(report["grades"], args.out))
        report["text"] = "\n".join(
            _grade_lines([GradeRow(**g) for g in report["grades"]])
            + [f"thresholds [{report['lambda1']}, {report['lambda2']}]  valid {report['valid']}"]
        )
    return report


def cmd_replay(args: argparse.Namespace) -> Dict:
    run = RunConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
    if run.command not in COMMANDS:
        raise RatingScaleError(f"cannot replay command {run.command!r}")
    replayed = argparse.Namespace(
        **run.args, command=run.command, func=COMMANDS[run.command],
        seed=run.seed, workers=run.workers, pretty=run.pretty, save_config=None,
    )
    logger.info("replaying %s from %s", run.command, args.config)
    return replayed.func(replayed)


COMMANDS: Dict[str, Callable[[argparse.Namespace], Dict]] = {
    "generate": cmd_generate,
    "enumerate": cmd_enumerate,
    "build": cmd_build,
    "solve": cmd_solve,
    "confusion": cmd_confusion,
    "benchmark": cmd_benchmark,
    "validate": cmd_validate,
    "experiment": cmd_experiment,
}


# --------------- Parser ---------------


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for every random choice")
    common.add_argument("--workers", type=int, default=config.DEFAULT_WORKERS)
    common.add_argument("--pretty", action="store_true", help="human-readable table instead of JSON")
    common.add_argument("--log-level", default=config.LOG_LEVEL)
    common.add_argument("--save-config", metavar="PATH", help="write this invocation as a replayable JSON")
    return common


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset CSV (index,score,default)")
    p.add_argument("--n", type=int, help="counterparts, with --defaults")
    p.add_argument("--defaults", type=_int_list, default=[], help="1-based default positions, e.g. 10,11,13")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, required=True, help="number of grades")
    p.add_argument("--preset", type=int, choices=[1, 2], default=1)
    p.add_argument("--logical", choices=[v.value for v in LogicalVariant], default="global")
    p.add_argument("--monotonicity", choices=["approx", "off"], default="approx")
    p.add_argument("--exact-monotonicity", action="store_true")
    p.add_argument("--allow-large", action="store_true", help="lift the exact-monotonicity size cap")
    p.add_argument("--no-thresholds", action="store_true")
    p.add_argument("--no-concentration", action="store_true")
    p.add_argument("--lambda1", type=int)
    p.add_argument("--lambda2", type=int)


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["auto", "exact", "anneal"], default="auto")
    p.add_argument("--exact-cap", type=int, default=config.EXACT_SOLVER_CAP)
    p.add_argument("--restarts", type=int, default=config.ANNEAL_RESTARTS)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--t-start", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--no-refine", action="store_true", help="return the raw annealed state")


def _cases(text: str):
    try:
        return [tuple(int(v) for v in item.split(":")) for item in text.split(",") if item]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected n:m pairs like 8:3,12:3, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rating_scales",
        description="Define credit rating scales as QUBO problems, solve them, and check them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("generate", parents=[common], help="synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--fraction", type=float, required=True, help="default share in (0, 1)")
    p.add_argument("--scores", action="store_true", help="attach sorted synthetic scores")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("enumerate", parents=[common], help="rating scales of n counterparts in m grades")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--limit", type=int, default=100_000)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("build", parents=[common], help="compose the QUBO and write it in v1 format")
    _dataset_args(p)
    _model_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", parents=[common], help="minimize, decode and validate")
    _dataset_args(p)
    _model_args(p)
    _solver_args(p)
    p.add_argument("--model", help="pre-built v1 model over the same layout")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("confusion", parents=[common], help="approximate vs exact monotonicity on all staircases")
    p.add_argument("--instance", choices=sorted(experiments.CONFUSION_INSTANCES))
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--defaults", type=_int_list, default=[])
    p.add_argument("--mu-ratio", type=float, help="mu03 / mu1; default from weight set 1")
    p.add_argument("--histogram", metavar="CSV", help="write energy,label rows")
    p.set_defaults(func=cmd_confusion)

    p = sub.add_parser("benchmark", parents=[common], help="time the brute-force search")
    p.add_argument("--cases", type=_cases, default=_cases("8:3,12:3,14:4,17:4,20:5"))
    p.add_argument("--fraction", type=float, default=0.15)
    p.add_argument("--published", action="store_true", help="use the published timings instead of running")
    p.add_argument("--fit", action="store_true", help="fit time = a * C^b and extrapolate")
    p.add_argument("--out", help="CSV n,m,configurations,valid_count,elapsed_seconds")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", parents=[common], help="check a partition against every constraint")
    _dataset_args(p)
    p.add_argument("--partition", type=_int_list, required=True, help="grade sizes, e.g. 16,16,17")
    p.add_argument("--lambda1", type=int)
    p.add_argument("--lambda2", type=int)
    p.add_argument("--concentration-threshold", type=float, default=config.CONCENTRATION_THRESHOLD)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("experiment", parents=[common], help="preset-weight end-to-end run")
    p.add_argument("--case", choices=sorted(experiments.PRESET_CASES))
    _dataset_args(p)
    p.add_argument("--m", type=int)
    p.add_argument("--preset", type=int, choices=[1, 2], default=1)
    p.add_argument("--logical", choices=[v.value for v in LogicalVariant], default="global")
    p.add_argument("--monotonicity", choices=["approx", "off"], default="approx")
    p.add_argument("--exact-monotonicity", action="store_true")
    p.add_argument("--no-thresholds", action="store_true")
    p.add_argument("--no-concentration", action="store_true")
    p.add_argument("--lambda1", type=int)
    p.add_argument("--lambda2", type=int)
    p.add_argument("--out", help="CSV grade,cardinality,defaults,default_rate")
    _solver_args(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("replay", help="re-run a saved invocation")
    p.add_argument("config")
    p.set_defaults(func=cmd_replay, seed=0, workers=1, pretty=False, log_level=config.LOG_LEVEL, save_config=None)
    return parser


def _save_run(args: argparse.Namespace) -> None:
    skip = {"func", "command", "seed", "workers", "pretty", "save_config", "log_level"}
    run = RunConfig(
        command=args.command,
        seed=args.seed,
        workers=args.workers,
        pretty=args.pretty,
        args={k: v for k, v in vars(args).items() if k not in skip},
    )
    Path(args.save_config).write_text(run.model_dump_json(indent=2), encoding="utf-8")


def _emit(result: Dict, pretty: bool) -> None:
    text = result.pop("text", None)
    if result.get("status") == "error":
        print(f"error: {result.get('error_message')}", file=sys.stderr)
    if pretty and text:
        print(text)
    elif text and result.pop("plain", False):
        print(text)
    else:
        print(json.dumps(result, indent=2 if pretty else None, default=str))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config.configure_logging(args.log_level)
    handler: Callable[[argparse.Namespace], Dict] = args.func
    try:
        if args.save_config:
            _save_run(args)
        result = handler(args)
    except (RatingScaleError, ValueError, OSError, KeyError) as exc:
        result = {"status": "error", "error_message": str(exc)}
    _emit(result, args.pretty)
    return 0 if result.get("status") == "success" else 1
