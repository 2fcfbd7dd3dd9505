"""
Run configuration
JSON run documents merged with command-line overrides
"""

import re
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..config import DEFAULT_THRESHOLDS, DiagnosticThresholds, Settings, parse_seed
from ..core import TaskType
from ..errors import ConfigError, KOutOfRange, RatioOutOfRange
from ..regimes import RegimeKind, RegimeSpec
from ..suite import MetricSpec, parse_suite
from ..validate import DEFAULT_K, DEFAULT_TEST_RATIO

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "markdown", "curves")

REGRESSION_REGIMES = {
    RegimeKind.HEAVY_TAIL_REGRESSION,
    RegimeKind.LOW_BASELINE_COUNTS,
    RegimeKind.STRUCTURED_RESIDUALS,
}

_PLAN_PATTERN = re.compile(r"^\s*([a-z_]+)\s*(?:[(:]\s*([0-9.eE+-]*)\s*\)?)?\s*$")


class ValidationKind(Enum):
    HOLDOUT = "holdout"
    KFOLD = "kfold"
    STRATIFIED_KFOLD = "stratified_kfold"
    NONE = "none"


@dataclass(frozen=True)
class ValidationPlan:
    kind: ValidationKind
    k: int = DEFAULT_K
    ratio: float = DEFAULT_TEST_RATIO

    def __post_init__(self):
        if self.kind in (ValidationKind.KFOLD, ValidationKind.STRATIFIED_KFOLD) and self.k < 2:
            raise KOutOfRange(f"k must be at least 2, got {self.k}")
        if self.kind == ValidationKind.HOLDOUT and not 0.0 < self.ratio < 1.0:
            raise RatioOutOfRange(f"Hold-out ratio must lie strictly between 0 and 1, got {self.ratio}")

    @classmethod
    def parse(cls, value: Any) -> "ValidationPlan":
        """Accept `stratified_kfold(5)`, `kfold:10`, `holdout(0.2)`, `none` or a mapping"""
        if isinstance(value, ValidationPlan):
            return value
        if isinstance(value, Mapping):
            kind = cls._kind(value.get("kind"))
            return cls(kind, int(value.get("k", DEFAULT_K)), float(value.get("ratio", DEFAULT_TEST_RATIO)))
        match = _PLAN_PATTERN.match(str(value))
        if not match:
            raise ConfigError(f"Cannot read validation plan {value!r}")
        kind = cls._kind(match.group(1))
        argument = match.group(2)
        if not argument:
            return cls(kind)
        try:
            if kind == ValidationKind.HOLDOUT:
                return cls(kind, ratio=float(argument))
            return cls(kind, k=int(argument))
        except ValueError as e:
            raise ConfigError(f"Bad argument in validation plan {value!r}") from e

    @staticmethod
    def _kind(name: Any) -> ValidationKind:
        try:
            return ValidationKind(name)
        except ValueError:
            known = ", ".join(k.value for k in ValidationKind)
            raise ConfigError(f"Unknown validation '{name}' (known: {known})") from None

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == ValidationKind.HOLDOUT:
            return {"kind": self.kind.value, "ratio": self.ratio}
        if self.kind == ValidationKind.NONE:
            return {"kind": self.kind.value}
        return {"kind": self.kind.value, "k": self.k}


@dataclass(frozen=True)
class RunConfig:
    """Everything one `evaluate` run needs; exactly one of input_path and regime is set"""
    task: TaskType
    seed: int
    validation: ValidationPlan
    input_path: Optional[str] = None
    regime: Optional[RegimeSpec] = None
    metrics: Tuple[MetricSpec, ...] = ()
    thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS
    outputs: Tuple[str, ...] = ("json",)
    out_dir: str = "metricsmith-out"
    permissive: bool = False
    positive_class: Optional[str] = None
    classes: Optional[Tuple[str, ...]] = None
    model_id: str = "model"
    bins: int = 10
    workers: int = 1
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if (self.input_path is None) == (self.regime is None):
            raise ConfigError("Exactly one input source is required: a prediction file or a regime")
        unknown = [f for f in self.outputs if f not in OUTPUT_FORMATS]
        if unknown:
            raise ConfigError(f"Unknown output format(s) {unknown} (known: {', '.join(OUTPUT_FORMATS)})")
        if self.bins < 2:
            raise ConfigError(f"bins must be at least 2, got {self.bins}")

    @property
    def source(self) -> str:
        if self.input_path is not None:
            return self.input_path
        return f"regime:{self.regime.kind.value}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task": self.task.value,
            "input": {"path": self.input_path} if self.input_path else {"regime": self.regime.to_dict()},
            "metrics": [m.to_dict() for m in self.metrics],
            "validation": self.validation.to_dict(),
            "seed": self.seed,
            "thresholds": self.thresholds.to_dict(),
            "outputs": list(self.outputs),
            "out_dir": self.out_dir,
            "permissive": self.permissive,
        }


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return payload


def _task_of(raw_task: Any, regime: Optional[RegimeSpec]) -> TaskType:
    if regime is not None:
        inferred = TaskType.REGRESSION if regime.kind in REGRESSION_REGIMES else TaskType.CLASSIFICATION
        if raw_task is not None and TaskType(raw_task) != inferred:
            raise ConfigError(f"Regime '{regime.kind.value}' is a {inferred.value} regime, not {raw_task}")
        return inferred
    if raw_task is None:
        raise ConfigError("'task' is required for file input (classification or regression)")
    try:
        return TaskType(raw_task)
    except ValueError:
        raise ConfigError(f"Unknown task '{raw_task}' (known: classification, regression)") from None


def _classes_of(raw: Any) -> Optional[Tuple[str, ...]]:
    if raw is None:
        return None
    if isinstance(raw, str) or not isinstance(raw, (list, tuple)):
        raise ConfigError(f"'classes' must be a list of class identifiers, got {raw!r}")
    return tuple(str(c) for c in raw)


def build_run_config(
    payload: Mapping[str, Any],
    settings: Optional[Settings] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Merge a config document with CLI overrides (non-None values win)

    The seed comes from the overrides, then the document, then METRICSMITH_SEED, then 0.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    merged: Dict[str, Any] = dict(payload)
    merged.update(overrides)
    # threshold overrides are merged key by key
    merged["thresholds"] = {**(payload.get("thresholds") or {}), **(overrides.get("thresholds") or {})}
    settings = settings or Settings()

    seed = parse_seed(merged["seed"]) if merged.get("seed") is not None else settings.seed

    raw_input = merged.get("input")
    input_path: Optional[str] = None
    regime: Optional[RegimeSpec] = None
    if isinstance(raw_input, str):
        input_path = raw_input
    elif isinstance(raw_input, Mapping):
        if "path" in raw_input and "regime" in raw_input:
            raise ConfigError("Input names both a file and a regime; choose one")
        if "path" in raw_input:
            input_path = str(raw_input["path"])
        elif "regime" in raw_input:
            regime = RegimeSpec.from_dict(raw_input["regime"], seed=seed)
    elif raw_input is not None:
        raise ConfigError(f"Cannot read input {raw_input!r}")

    task = _task_of(merged.get("task"), regime)
    metrics = tuple(parse_suite(merged["metrics"], task)) if merged.get("metrics") else ()
    default_plan = "stratified_kfold" if task == TaskType.CLASSIFICATION else "kfold"
    validation = ValidationPlan.parse(merged.get("validation", default_plan))
    if validation.kind == ValidationKind.STRATIFIED_KFOLD and task == TaskType.REGRESSION:
        raise ConfigError("Stratified folds are available for classification only")

    outputs = merged.get("outputs", ["json"])
    if isinstance(outputs, str):
        outputs = [outputs]

    config = RunConfig(
        task=task,
        seed=seed,
        validation=validation,
        input_path=input_path,
        regime=regime,
        metrics=metrics,
        thresholds=DEFAULT_THRESHOLDS.with_overrides(merged.get("thresholds")),
        outputs=tuple(dict.fromkeys(outputs)),
        out_dir=str(merged.get("out_dir", "metricsmith-out")),
        permissive=bool(merged.get("permissive", False)),
        positive_class=merged.get("positive_class"),
        classes=_classes_of(merged.get("classes")),
        model_id=str(merged.get("model_id", "model")),
        bins=int(merged.get("bins", 10)),
        workers=int(merged.get("workers", settings.workers)),
    )
    logger.debug(f"Run config: {json.dumps(config.to_dict(), default=str)}")
    return config


def load_run_config(
    path: Optional[str],
    settings: Optional[Settings] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Read an optional JSON config file and apply overrides"""
    payload = read_config_file(path)
    if path and isinstance(payload.get("input"), str) and not Path(payload["input"]).is_absolute():
        # relative input paths in a config file resolve against the file's directory
        payload["input"] = str(Path(path).parent / payload["input"])
    return build_run_config(payload, settings, overrides)
