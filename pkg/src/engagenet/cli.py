"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input or parse error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .bn.dag import Dag
from .bootstrap import InvariantViolation, RESAMPLING_METHODS
from .engagement import build_matrix, read_matrix_csv
from .ingest import (
    DEFAULT_EXCLUSION_RATE,
    ConfigError,
    LogFormatError,
    load_config,
    parse_log,
    save_config,
    write_log,
)
from .inference import QueryError, empirical_conditional, fit_cpts, model_query, parse_query
from .pipeline import (
    CONSENSUS_FILE,
    DEFAULT_QUERIES,
    STRENGTHS_FILE,
    InputError,
    LearnSettings,
    consensus_document,
    learn_from_matrix,
    load_events,
    report_from_artifacts,
    run_pipeline,
)
from .sensitivity import DEFAULT_WINDOWS, sensitivity_from_events
from .synthetic import (
    course_config_for,
    emit_logs,
    load_ground_truth,
    reference_preset,
    render_log_rows,
    sample_cohort,
    save_ground_truth,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _windows(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(values) < 2 or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("need at least two positive window lengths")
    return values


def _learn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=_positive_int, default=100)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0, help="CPT smoothing for queries")
    p.add_argument("--resampling", choices=RESAMPLING_METHODS, default="bootstrap")
    p.add_argument("--workers", type=_positive_int, default=1)


def _settings(args) -> LearnSettings:
    if not 0 < args.threshold <= 1:
        raise InputError("--threshold must be in (0, 1]")
    if not 0 <= args.seed < 2**64:
        raise InputError("--seed must be an unsigned 64-bit integer")
    return LearnSettings(args.iterations, args.threshold, args.seed, args.restarts, args.alpha, args.resampling)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="engagenet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a log and print ingest diagnostics")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)

    p = sub.add_parser("matrix", help="build the binary engagement matrix")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--window-days", type=_positive_int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("learn", help="bootstrap-learn a consensus network from a matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--exclusion-rate", type=float, default=DEFAULT_EXCLUSION_RATE)
    p.add_argument("--out-dir", required=True)
    _learn_flags(p)

    p = sub.add_parser("query", help="model-based and empirical conditional probabilities")
    p.add_argument("--matrix", required=True)
    p.add_argument("--consensus", required=True, help="consensus.json")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("queries", nargs="+", metavar="QUERY", help='e.g. "P(sub_6=1 | sub_5=1)"')

    p = sub.add_parser("simulate", help="synthetic cohort, log and config from a ground truth")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["reference"], default="reference")
    src.add_argument("--ground-truth", help="ground-truth JSON")
    p.add_argument("--students", type=_positive_int, default=204)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spread-days", type=_positive_int, default=14)
    p.add_argument("--async-rate", type=float, default=0.0)
    p.add_argument("--unmapped-rate", type=float, default=0.0)
    p.add_argument("--time-format", choices=["iso", "moodle"], default="iso")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sensitivity", help="rerun learning across synchronous-window lengths")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--windows", type=_windows, default=list(DEFAULT_WINDOWS))
    p.add_argument("--out-dir", required=True)
    _learn_flags(p)

    p = sub.add_parser("report", help="rebuild report.md from pipeline artifacts")
    p.add_argument("--out-dir", required=True, help="directory holding pipeline outputs")
    p.add_argument("--query", action="append", dest="queries")
    p.add_argument("--out", help="write here instead of stdout")

    p = sub.add_parser("pipeline", help="log -> matrix -> consensus -> DOT and report")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--window-days", type=_positive_int)
    p.add_argument("--query", action="append", dest="queries")
    p.add_argument("--out-dir", required=True)
    _learn_flags(p)
    return parser


def _cmd_ingest(args) -> None:
    config = load_config(args.config)
    _, diag = parse_log(args.log, config)
    print(json.dumps(diag.as_dict(), indent=2))


def _cmd_matrix(args) -> None:
    config = load_config(args.config)
    if args.window_days:
        config = config.with_window(args.window_days)
    events, _ = load_events(args.log, config)
    build_matrix(events, config.schedule(), config).to_csv(args.out)


def _cmd_learn(args) -> None:
    settings = _settings(args)
    matrix = read_matrix_csv(args.matrix)
    _, excluded, consensus = learn_from_matrix(matrix, args.exclusion_rate, settings, args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    consensus.strengths.to_csv(out / STRENGTHS_FILE)
    doc = consensus_document(
        consensus,
        settings,
        {"exclusion_rate": args.exclusion_rate, "excluded": [[r.name, a] for r, a in excluded]},
    )
    (out / CONSENSUS_FILE).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _cmd_query(args) -> None:
    matrix = read_matrix_csv(args.matrix)
    doc = json.loads(Path(args.consensus).read_text(encoding="utf-8"))
    dag = Dag.from_dict(doc)
    cpts = fit_cpts(matrix.select(dag.nodes), dag, args.alpha)
    for text in args.queries:
        q = parse_query(text)
        model = model_query(dag, cpts, q)
        try:
            p, n = empirical_conditional(matrix, q)
            emp = f"empirical={p:.3f} support={n}"
        except QueryError:
            emp = "empirical=n/a support=0"
        print(f"{q}\tmodel={model:.3f}\t{emp}")


def _cmd_simulate(args) -> None:
    gt = load_ground_truth(args.ground_truth) if args.ground_truth else reference_preset()
    for name in ("async_rate", "unmapped_rate"):
        if not 0 <= getattr(args, name) <= 1:
            raise InputError(f"--{name.replace('_', '-')} must be in [0, 1]")
    matrix = sample_cohort(gt, args.students, args.seed)
    events = emit_logs(
        matrix, gt.schedule, args.seed, spread_days=args.spread_days, async_rate=args.async_rate
    )
    rows = render_log_rows(events, args.seed, unmapped_rate=args.unmapped_rate, time_format=args.time_format)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_log(out / "log.csv", rows)
    save_config(course_config_for(gt.schedule), out / "config.json")
    matrix.to_csv(out / "truth_matrix.csv")
    save_ground_truth(gt, out / "ground_truth.json")
    (out / "ground_truth.md").write_text(gt.describe(), encoding="utf-8")


def _cmd_sensitivity(args) -> None:
    settings = _settings(args)
    config = load_config(args.config)
    events, _ = load_events(args.log, config)
    rep = sensitivity_from_events(
        events,
        config,
        args.windows,
        iterations=settings.iterations,
        threshold=settings.threshold,
        params=settings.search_params(),
        workers=args.workers,
        method=settings.method,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sensitivity.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "sensitivity.md").write_text(rep.to_markdown(), encoding="utf-8")


def _cmd_report(args) -> None:
    queries = [parse_query(q) for q in (args.queries or DEFAULT_QUERIES)]
    text = report_from_artifacts(args.out_dir, queries)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_pipeline(args) -> None:
    run_pipeline(
        args.log,
        args.config,
        args.out_dir,
        window_days=args.window_days,
        settings=_settings(args),
        workers=args.workers,
        queries=args.queries or DEFAULT_QUERIES,
    )


_COMMANDS = {
    "ingest": _cmd_ingest,
    "matrix": _cmd_matrix,
    "learn": _cmd_learn,
    "query": _cmd_query,
    "simulate": _cmd_simulate,
    "sensitivity": _cmd_sensitivity,
    "report": _cmd_report,
    "pipeline": _cmd_pipeline,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"engagenet: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ConfigError, LogFormatError, InputError, QueryError, KeyError, ValueError, OSError) as exc:
        print(f"engagenet: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
