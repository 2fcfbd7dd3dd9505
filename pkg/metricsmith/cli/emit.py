"""
Report emission
JSON, markdown and curve-table renderings of evaluation and scenario reports
"""

import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from ..core import ClassificationData, EvaluationReport, RegressionData
from ..diagnose import calibration_audit, reliability_table
from ..errors import DataError, MetricInfeasible, OutputError, TooFewSamples
from ..flags import DiagnosticFlag
from ..rank import pr_curve, roc_curve
from ..regress import residual_table
from ..scenarios import ScenarioReport
from .ingest import write_table

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("x", "y", "threshold")
RESIDUAL_COLUMNS = ("bin_mid", "mean_residual", "std_residual", "count")
RELIABILITY_COLUMNS = ("lower", "upper", "mean_probability", "positive_rate", "count")
CALIBRATION_COLUMNS = ("lower", "upper", "count", "mean_confidence", "empirical_accuracy")


def jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null"""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def to_json(payload: Mapping[str, Any]) -> str:
    # key order follows construction order, which is fixed per report type
    return json.dumps(jsonable(payload), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write_text(text: str, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    logger.debug(f"Wrote {path}")
    return path


def _num(value: Any) -> str:
    if value is None:
        return "n/a"
    value = float(value)
    if math.isnan(value):
        return "n/a"
    return f"{value:.6g}"


def _flag_lines(flags: Sequence[DiagnosticFlag]) -> List[str]:
    if not flags:
        return ["no flags"]
    lines = []
    for flag in flags:
        evidence = ", ".join(f"{k}={_num(v)}" for k, v in flag.evidence.items())
        line = f"- **{flag.code.value}** ({flag.severity.value}): {flag.message}"
        lines.append(f"{line} [{evidence}]" if evidence else line)
    return lines


def _report_section(report: EvaluationReport, heading: str = "#") -> List[str]:
    provenance = report.provenance
    lines = [
        f"{heading} Evaluation report: {report.model_id}",
        "",
        f"- task: {report.task.value}",
        f"- protocol: {provenance.protocol.value} (k={provenance.k})",
        f"- seed: {provenance.seed}",
        f"- rows: {provenance.n_rows}",
        f"- source: {provenance.source or 'n/a'}",
        f"- aggregation: {provenance.aggregation}",
        "",
        f"{heading}# Metrics",
        "",
        "| metric | mean ± std | min | max | folds | warnings |",
        "|---|---|---|---|---|---|",
    ]
    for name, metric in report.metrics.items():
        lines.append(
            f"| {name} | {_num(metric.mean)} ± {_num(metric.sample_std)} | {_num(metric.min)} "
            f"| {_num(metric.max)} | {len(metric.per_fold)} | {', '.join(metric.warnings) or '-'} |"
        )
    lines += ["", f"{heading}# Flags", ""]
    lines += _flag_lines(report.flags)
    return lines


def render_markdown(report: EvaluationReport) -> str:
    return "\n".join(_report_section(report)) + "\n"


def render_scenario_markdown(scenario: ScenarioReport) -> str:
    lines = [
        f"# Scenario: {scenario.name}",
        "",
        scenario.description,
        "",
        f"- seed: {scenario.seed}",
        f"- n: {scenario.n}",
        "",
        "## Rankings",
        "",
    ]
    if not scenario.comparisons:
        lines.append("no comparisons")
    for c in scenario.comparisons:
        lines.append(
            f"- {c.metric_a}: {' > '.join(c.model_order_a)} | {c.metric_b}: {' > '.join(c.model_order_b)} "
            f"| kendall tau {_num(c.kendall_tau)}, inversions {c.inversions}"
        )
    lines += ["", "## Flags", ""]
    lines += _flag_lines(scenario.flags)
    for report in scenario.models.values():
        lines += [""] + _report_section(report, heading="##")
    return "\n".join(lines) + "\n"


def curve_tables(data: Any, bins: int = 10) -> Dict[str, Tuple[List[Dict[str, Any]], Tuple[str, ...]]]:
    """
    Plot-ready tables for one prediction set

    Binary scored data gives roc, pr and reliability tables, any scored classification data a
    calibration table, and regression data a residual table. Tables that cannot be built are skipped.
    """
    tables: Dict[str, Tuple[List[Dict[str, Any]], Tuple[str, ...]]] = {}
    if isinstance(data, ClassificationData):
        if data.y_score is None:
            logger.warning("No score columns; curve tables skipped")
            return tables
        if data.labels.is_binary:
            positive = data.labels.positive
            score = data.positive_scores()
            try:
                tables["roc"] = (roc_curve(data.y_true, score, positive).rows(), CURVE_COLUMNS)
                tables["pr"] = (pr_curve(data.y_true, score, positive).rows(), CURVE_COLUMNS)
            except MetricInfeasible as e:
                logger.warning(f"Curves skipped: {e}")
            reliability = reliability_table(data.y_true, score, positive, bins)
            tables["reliability"] = ([vars(b) for b in reliability], RELIABILITY_COLUMNS)
        audit = calibration_audit(data, bins)
        tables["calibration"] = ([b.to_dict() for b in audit.bins], CALIBRATION_COLUMNS)
    elif isinstance(data, RegressionData):
        try:
            tables["residuals"] = (residual_table(data, bins).rows(), RESIDUAL_COLUMNS)
        except TooFewSamples as e:
            logger.warning(f"Residual table skipped: {e}")
    return tables


def _write_curves(data: Any, out_dir: Path, prefix: str, bins: int) -> List[Path]:
    written = []
    for name, (rows, columns) in curve_tables(data, bins).items():
        written.append(write_table(rows, columns, out_dir / f"{prefix}{name}.csv"))
    return written


def emit_report(
    report: EvaluationReport,
    formats: Iterable[str],
    out_dir: str,
    data: Any = None,
    stem: str = "report",
    bins: int = 10,
) -> List[Path]:
    """Write the requested renderings of one report; returns the written paths"""
    target = Path(out_dir)
    written: List[Path] = []
    for fmt in formats:
        if fmt == "json":
            written.append(_write_text(to_json(report.to_dict()), target / f"{stem}.json"))
        elif fmt == "markdown":
            written.append(_write_text(render_markdown(report), target / f"{stem}.md"))
        elif fmt == "curves":
            if data is None:
                logger.warning("Curve tables need the prediction set; none was supplied")
                continue
            written.extend(_write_curves(data, target, "", bins))
        else:
            raise OutputError(f"Unknown output format '{fmt}'")
    logger.info(f"Emitted {len(written)} file(s) to {target}")
    return written


def emit_scenario(scenario: ScenarioReport, formats: Iterable[str], out_dir: str, bins: int = 10) -> List[Path]:
    target = Path(out_dir)
    written: List[Path] = []
    for fmt in formats:
        if fmt == "json":
            written.append(_write_text(to_json(scenario.to_dict()), target / f"{scenario.name}.json"))
        elif fmt == "markdown":
            written.append(_write_text(render_scenario_markdown(scenario), target / f"{scenario.name}.md"))
        elif fmt == "curves":
            for model_id, data in scenario.datasets.items():
                written.extend(_write_curves(data, target, f"{scenario.name}_{model_id}_", bins))
        else:
            raise OutputError(f"Unknown output format '{fmt}'")
    logger.info(f"Emitted {len(written)} file(s) for scenario '{scenario.name}' to {target}")
    return written


def load_report(path: str) -> EvaluationReport:
    """Read a JSON report written by emit_report"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError as e:
        raise DataError(f"Report not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Cannot read report {path}: {e}") from e
    try:
        return EvaluationReport.from_dict(payload)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{path} is not an evaluation report: {e}") from e
