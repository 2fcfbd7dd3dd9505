"""
metricsmith command line
evaluate, split, scenario and report subcommands
"""

import sys
import json
import time
import logging
import argparse
from typing import Any, Dict, List, Optional, Sequence

from .. import __version__
from ..config import DEFAULT_THRESHOLDS, Settings, load_settings, parse_seed
from ..core import ClassificationData, TaskType
from ..errors import ConfigError, MetricsmithError
from ..event_log import get_event_logger, reset_event_logger, setup_logging
from ..scenarios import SCENARIOS, run_scenario
from ..validate import DEFAULT_K
from .config import OUTPUT_FORMATS, ValidationKind, ValidationPlan, load_run_config
from .emit import emit_report, emit_scenario, load_report, render_markdown, to_json
from .ingest import parse_predictions, write_split
from .runner import infeasible_metrics, run, split_assignment

logger = logging.getLogger("metricsmith.cli")


class UsageError(ConfigError):
    """Command-line usage error (exit 1)"""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; exit code 2 is reserved for data errors
    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def _pairs(items: Optional[Sequence[str]], option: str) -> Dict[str, Any]:
    """Parse repeated key=value options; values are read as JSON when possible"""
    result: Dict[str, Any] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{option} expects key=value, got {item!r}")
        try:
            result[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            result[key.strip()] = raw
    return result


def _add_output_options(parser: argparse.ArgumentParser, default_out: Optional[str]) -> None:
    parser.add_argument("--out", default=default_out, help="Output directory")
    parser.add_argument(
        "--format",
        dest="formats",
        action="append",
        choices=OUTPUT_FORMATS,
        help="Output format; repeat for several (default: json)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metricsmith", description="Metric evaluation toolkit with misuse diagnostics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default: METRICSMITH_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    evaluate = commands.add_parser("evaluate", help="Evaluate a prediction file or generated regime")
    evaluate.add_argument("--config", help="JSON run config")
    evaluate.add_argument("--input", help="Prediction CSV")
    evaluate.add_argument("--task", choices=[t.value for t in TaskType], help="Task of the prediction file")
    evaluate.add_argument("--regime", help="Generate data from this regime instead of reading a file")
    evaluate.add_argument("--regime-param", action="append", metavar="KEY=VALUE", help="Regime parameter")
    evaluate.add_argument("--n", type=int, help="Generated sample count")
    evaluate.add_argument("--metric", action="append", help="Metric, e.g. f_beta:beta=2; repeat for several")
    evaluate.add_argument("--validation", help="holdout(r), kfold(k), stratified_kfold(k) or none")
    evaluate.add_argument("--seed", help="Random seed (default: METRICSMITH_SEED or 0)")
    evaluate.add_argument("--threshold", action="append", metavar="KEY=VALUE", help="Diagnostic threshold override")
    evaluate.add_argument("--positive-class", help="Positive class of a binary task")
    evaluate.add_argument("--model-id", help="Model identifier in the report")
    evaluate.add_argument("--bins", type=int, help="Calibration and residual bin count")
    evaluate.add_argument("--workers", type=int, help="Threads for per-fold evaluation")
    evaluate.add_argument(
        "--permissive",
        action="store_true",
        default=None,
        help="Record infeasible metrics as flags instead of failing",
    )
    _add_output_options(evaluate, None)
    evaluate.set_defaults(handler=cmd_evaluate)

    split = commands.add_parser("split", help="Write a fold assignment as index,fold rows")
    split.add_argument("--input", help="Prediction CSV whose y_true column stratifies the split")
    split.add_argument("--task", choices=[t.value for t in TaskType], default=TaskType.CLASSIFICATION.value)
    split.add_argument("--n", type=int, help="Row count when no input file is given")
    split.add_argument(
        "--validation", default=f"kfold({DEFAULT_K})", help="holdout(r), kfold(k) or stratified_kfold(k)"
    )
    split.add_argument("--seed", help="Random seed (default: METRICSMITH_SEED or 0)")
    split.add_argument("--out", required=True, help="Output CSV path")
    split.set_defaults(handler=cmd_split)

    scenario = commands.add_parser("scenario", help="Run a named misuse scenario")
    scenario.add_argument("name", choices=sorted(SCENARIOS), help="Scenario name")
    scenario.add_argument("--seed", help="Random seed (default: METRICSMITH_SEED or 0)")
    scenario.add_argument("--n", type=int, help="Sample count (scenario default when omitted)")
    scenario.add_argument("--k", type=int, default=DEFAULT_K, help="Fold count")
    scenario.add_argument("--param", action="append", metavar="KEY=VALUE", help="Scenario parameter")
    scenario.add_argument("--threshold", action="append", metavar="KEY=VALUE", help="Diagnostic threshold override")
    _add_output_options(scenario, "metricsmith-out")
    scenario.set_defaults(handler=cmd_scenario)

    report = commands.add_parser("report", help="Re-render a saved JSON report")
    report.add_argument("path", help="JSON report written by evaluate")
    _add_output_options(report, None)
    report.set_defaults(handler=cmd_report)
    return parser


def _seed(raw: Optional[str], settings: Settings) -> int:
    return parse_seed(raw) if raw is not None else settings.seed


def cmd_evaluate(args: argparse.Namespace, settings: Settings) -> int:
    if args.input and args.regime:
        raise UsageError("--input and --regime are mutually exclusive")
    if (args.regime_param or args.n is not None) and not args.regime:
        raise UsageError("--regime-param and --n need --regime")

    overrides: Dict[str, Any] = {
        "task": args.task,
        "metrics": args.metric,
        "validation": args.validation,
        "seed": args.seed,
        "outputs": args.formats,
        "out_dir": args.out,
        "permissive": args.permissive,
        "positive_class": args.positive_class,
        "model_id": args.model_id,
        "bins": args.bins,
        "workers": args.workers,
        "thresholds": _pairs(args.threshold, "--threshold") or None,
    }
    if args.input:
        overrides["input"] = args.input
    elif args.regime:
        regime: Dict[str, Any] = {"kind": args.regime, "parameters": _pairs(args.regime_param, "--regime-param")}
        if args.n is not None:
            regime["n"] = args.n
        overrides["input"] = {"regime": regime}

    config = load_run_config(args.config, settings, overrides)
    get_event_logger().log_run_start("evaluate", config.seed, source=config.source)
    result = run(config)
    for message in infeasible_metrics(result.report) or []:
        logger.warning(f"Recorded as infeasible: {message}")
    for path in result.artifacts:
        print(path)
    return 0


def cmd_split(args: argparse.Namespace, settings: Settings) -> int:
    seed = _seed(args.seed, settings)
    plan = ValidationPlan.parse(args.validation)
    if plan.kind == ValidationKind.NONE:
        raise UsageError("split needs holdout, kfold or stratified_kfold")
    get_event_logger().log_run_start("split", seed, validation=plan.to_dict())

    labels = None
    if args.input:
        data = parse_predictions(args.input, TaskType(args.task))
        n = len(data)
        if isinstance(data, ClassificationData):
            labels = data.y_true
    elif args.n is not None:
        n = args.n
    else:
        raise UsageError("split needs --input or --n")

    assignment = split_assignment(plan, n, seed, labels)
    print(write_split(assignment, args.out))
    return 0


def cmd_scenario(args: argparse.Namespace, settings: Settings) -> int:
    seed = _seed(args.seed, settings)
    thresholds = DEFAULT_THRESHOLDS.with_overrides(_pairs(args.threshold, "--threshold"))
    get_event_logger().log_run_start("scenario", seed, scenario=args.name)
    scenario = run_scenario(args.name, seed=seed, n=args.n, thresholds=thresholds, k=args.k,
                            **_pairs(args.param, "--param"))
    for path in emit_scenario(scenario, args.formats or ["json"], args.out):
        print(path)
    codes = scenario.flag_codes()
    logger.info(f"Scenario '{args.name}' raised: {', '.join(sorted(set(codes))) or 'no flags'}")
    return 0


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    report = load_report(args.path)
    formats: List[str] = args.formats or ["markdown"]
    if args.out is None:
        # no output directory: render to stdout
        for fmt in formats:
            if fmt == "json":
                sys.stdout.write(to_json(report.to_dict()))
            elif fmt == "markdown":
                sys.stdout.write(render_markdown(report))
            else:
                raise UsageError("curve tables need the prediction set; use evaluate --format curves")
        return 0
    for path in emit_report(report, formats, args.out):
        print(path)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    started = time.time()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    try:
        settings = load_settings()
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    setup_logging(args.log_level or settings.log_level)
    events = reset_event_logger(settings.event_log_path)

    try:
        code = args.handler(args, settings)
    except MetricsmithError as e:
        events.log_error(e, {"command": args.command, "exit_code": e.exit_code})
        print(f"error: {e}", file=sys.stderr)
        code = e.exit_code
    events.log_run_finish(args.command, code, time.time() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
