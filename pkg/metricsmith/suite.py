"""
Metric Suite
Registry of named metrics, their parameters, task and ranking direction
"""

import json
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from . import classify, rank, regress
from .core import ClassificationData, Direction, RegressionData, TaskType
from .diagnose import calibration_audit
from .errors import ConfigError, NonPositiveBeta, NotBinary, ParameterOutOfRange, UnknownMetric
from .flags import FlagCode

logger = logging.getLogger(__name__)

PredictionSet = Union[ClassificationData, RegressionData]


@dataclass(frozen=True)
class MetricSpec:
    """A metric name plus its numeric parameters, e.g. f_beta with beta=2"""
    name: str
    params: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(sorted((str(k), float(v)) for k, v in self.params)))

    @property
    def key(self) -> str:
        """Canonical report name: `f_beta[beta=2]`, or the bare name without parameters"""
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.name}[{inner}]"

    def param(self, name: str, default: float) -> float:
        return dict(self.params).get(name, default)

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        """Parse `name` or `name:key=value,key=value`"""
        text = text.strip()
        if not text:
            raise UnknownMetric("Empty metric specifier")
        name, _, rest = text.partition(":")
        params = []
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"Metric parameter '{item}' in '{text}' is not key=value")
            try:
                params.append((key.strip(), float(value)))
            except ValueError as e:
                raise ConfigError(f"Metric parameter '{key.strip()}' in '{text}' must be numeric") from e
        return cls(name.strip(), tuple(params))

    @classmethod
    def from_obj(cls, obj: Any) -> "MetricSpec":
        """Accept a specifier string or a JSON object {"name": ..., "params": {...}} (flat keys also allowed)"""
        if isinstance(obj, MetricSpec):
            return obj
        if isinstance(obj, str):
            return cls.parse(obj)
        if isinstance(obj, Mapping) and "name" in obj:
            params = dict(obj.get("params", {}))
            params.update({k: v for k, v in obj.items() if k not in ("name", "params")})
            try:
                return cls(str(obj["name"]), tuple((k, float(v)) for k, v in params.items()))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Metric parameters must be numeric: {json.dumps(params, default=str)}") from e
        raise ConfigError(f"Cannot read a metric specifier from {obj!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "params": dict(self.params)}


MetricFn = Callable[[Any, MetricSpec], classify.MetricValue]


@dataclass(frozen=True)
class MetricDefinition:
    name: str
    task: TaskType
    direction: Direction
    compute: MetricFn
    allowed_params: Tuple[str, ...] = ()
    description: str = ""


def _beta(spec: MetricSpec, default: float = 1.0) -> float:
    return spec.param("beta", default)


def _positive_rates(data: ClassificationData) -> classify.ClassRates:
    cm = classify.build_confusion(data)
    if not data.labels.is_binary:
        raise NotBinary(f"Binary precision/recall need K=2, got K={data.labels.K}")
    return classify.class_rates(cm, data.labels.positive)


def _accuracy(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    return classify.MetricValue(classify.accuracy(classify.build_confusion(data)))


def _precision(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    rates = _positive_rates(data)
    codes = tuple(c for c in rates.degenerate if c == FlagCode.PRECISION_UNDEFINED.value)
    return classify.MetricValue(rates.precision, codes)


def _recall(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    rates = _positive_rates(data)
    codes = tuple(c for c in rates.degenerate if c == FlagCode.RECALL_UNDEFINED.value)
    return classify.MetricValue(rates.recall, codes)


def _minority_recall(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    """Recall of the least frequent class present in the evaluated rows (lowest index on ties)"""
    cm = classify.build_confusion(data)
    support = cm.support()
    present = np.flatnonzero(support > 0)
    minority = int(present[np.argmin(support[present])])
    rates = classify.class_rates(cm, data.labels.classes[minority])
    return classify.MetricValue(rates.recall, rates.degenerate)


def _fixed_beta(beta: float) -> MetricFn:
    def compute(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
        if not data.labels.is_binary:
            raise NotBinary(f"F{beta:g} on the positive class needs K=2, got K={data.labels.K}")
        return classify.class_f_beta(classify.build_confusion(data), data.labels.positive, beta)
    return compute


def _f_beta(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    return _fixed_beta(_beta(spec))(data, spec)


def _averaged(mode: classify.AveragingMode, beta: Optional[float] = None) -> MetricFn:
    def compute(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
        b = beta if beta is not None else _beta(spec)
        return classify.averaged_f_beta(classify.build_confusion(data), b, mode)
    return compute


def _mcc(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    return classify.mcc(classify.build_confusion(data))


def _log_loss(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    return classify.MetricValue(classify.log_loss(data))


def _binary_scores(data: ClassificationData) -> np.ndarray:
    if not data.labels.is_binary:
        raise NotBinary(f"Curve metrics need K=2, got K={data.labels.K}")
    return data.positive_scores()


def _roc_auc(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    curve = rank.roc_curve(data.y_true, _binary_scores(data), data.labels.positive)
    return classify.MetricValue(rank.roc_auc(curve))


def _pr_auc(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    curve = rank.pr_curve(data.y_true, _binary_scores(data), data.labels.positive)
    return classify.MetricValue(rank.pr_auc(curve))


def _calibration_gap(data: ClassificationData, spec: MetricSpec) -> classify.MetricValue:
    audit = calibration_audit(data, int(spec.param("bins", 10)))
    return classify.MetricValue(audit.expected_gap, audit.warnings)


def _mae(data: RegressionData, spec: MetricSpec) -> classify.MetricValue:
    return classify.MetricValue(regress.mae(data))


def _rmse(data: RegressionData, spec: MetricSpec) -> classify.MetricValue:
    return classify.MetricValue(regress.rmse(data))


def _r_squared(data: RegressionData, spec: MetricSpec) -> classify.MetricValue:
    return classify.MetricValue(regress.r_squared(data))


def _mape(data: RegressionData, spec: MetricSpec) -> classify.MetricValue:
    result = regress.mape(data, spec.param("epsilon", regress.DEFAULT_MAPE_EPSILON))
    return classify.MetricValue(result.value_percent, result.warnings)


_C = TaskType.CLASSIFICATION
_R = TaskType.REGRESSION
_UP = Direction.HIGHER_BETTER
_DOWN = Direction.LOWER_BETTER
_AVG = classify.AveragingMode

METRICS: Dict[str, MetricDefinition] = {
    d.name: d
    for d in (
        MetricDefinition("accuracy", _C, _UP, _accuracy, (), "trace / n"),
        MetricDefinition("precision", _C, _UP, _precision, (), "positive-class precision"),
        MetricDefinition("recall", _C, _UP, _recall, (), "positive-class recall"),
        MetricDefinition("minority_recall", _C, _UP, _minority_recall, (), "recall of the rarest present class"),
        MetricDefinition("f_beta", _C, _UP, _f_beta, ("beta",), "positive-class F-beta"),
        MetricDefinition("f1", _C, _UP, _fixed_beta(1.0), (), "positive-class F1"),
        MetricDefinition("f2", _C, _UP, _fixed_beta(2.0), (), "positive-class F2"),
        MetricDefinition("micro_f_beta", _C, _UP, _averaged(_AVG.MICRO), ("beta",), "pooled F-beta"),
        MetricDefinition("macro_f_beta", _C, _UP, _averaged(_AVG.MACRO), ("beta",), "mean per-class F-beta"),
        MetricDefinition("micro_f1", _C, _UP, _averaged(_AVG.MICRO, 1.0), (), "pooled F1"),
        MetricDefinition("macro_f1", _C, _UP, _averaged(_AVG.MACRO, 1.0), (), "mean per-class F1"),
        MetricDefinition("mcc", _C, _UP, _mcc, (), "Matthews correlation (binary)"),
        MetricDefinition("log_loss", _C, _DOWN, _log_loss, (), "cross-entropy of the true class"),
        MetricDefinition("roc_auc", _C, _UP, _roc_auc, (), "area under the ROC curve"),
        MetricDefinition("pr_auc", _C, _UP, _pr_auc, (), "average precision"),
        MetricDefinition("calibration_gap", _C, _DOWN, _calibration_gap, ("bins",), "expected confidence gap"),
        MetricDefinition("mae", _R, _DOWN, _mae, (), "mean absolute error"),
        MetricDefinition("rmse", _R, _DOWN, _rmse, (), "root mean squared error"),
        MetricDefinition("r_squared", _R, _UP, _r_squared, (), "coefficient of determination"),
        MetricDefinition("mape", _R, _DOWN, _mape, ("epsilon",), "mean absolute percentage error"),
    )
}


def definition(spec: Union[MetricSpec, str]) -> MetricDefinition:
    name = spec.name if isinstance(spec, MetricSpec) else MetricSpec.parse(spec).name
    try:
        return METRICS[name]
    except KeyError:
        raise UnknownMetric(f"Unknown metric '{name}' (known: {', '.join(sorted(METRICS))})") from None


def direction_of(spec: Union[MetricSpec, str]) -> Direction:
    """Ranking direction of a metric name or key such as `f_beta[beta=2]`"""
    if isinstance(spec, str) and "[" in spec:
        spec = spec.split("[", 1)[0]
    return definition(spec).direction


def check_spec(spec: MetricSpec, task: TaskType) -> MetricSpec:
    """Reject unknown metrics, unknown parameters, out-of-range values and task mismatches"""
    metric = definition(spec)
    if metric.task != task:
        raise ConfigError(f"Metric '{spec.key}' is a {metric.task.value} metric, not valid for {task.value}")
    for key, value in spec.params:
        if key not in metric.allowed_params:
            raise ConfigError(f"Metric '{spec.name}' takes no parameter '{key}'")
        if key == "beta" and not value > 0:
            raise NonPositiveBeta(f"beta must be positive, got {value:g}")
        if key == "bins" and (value < 2 or not float(value).is_integer()):
            raise ParameterOutOfRange(f"Calibration bins must be an integer >= 2, got {value:g}")
        if key == "epsilon" and not value > 0:
            raise ParameterOutOfRange(f"MAPE epsilon must be positive, got {value:g}")
    return spec


def parse_suite(items: Iterable[Any], task: TaskType) -> List[MetricSpec]:
    """Turn specifier strings/objects into checked MetricSpecs, dropping duplicate keys"""
    specs: List[MetricSpec] = []
    seen = set()
    for item in items:
        spec = check_spec(MetricSpec.from_obj(item), task)
        if spec.key in seen:
            logger.debug(f"Duplicate metric '{spec.key}' ignored")
            continue
        seen.add(spec.key)
        specs.append(spec)
    if not specs:
        raise ConfigError("Metric suite is empty")
    return specs


def default_suite(task: TaskType, binary: bool = True, scored: bool = True) -> List[MetricSpec]:
    """Metrics evaluated when a run names none; score-based metrics need `scored`"""
    if task == TaskType.REGRESSION:
        names = ["mae", "rmse", "r_squared", "mape"]
    elif binary:
        names = ["accuracy", "precision", "recall", "f1", "mcc"] + (["log_loss", "roc_auc", "pr_auc"] if scored else [])
    else:
        names = ["accuracy", "micro_f1", "macro_f1", "minority_recall"] + (["log_loss"] if scored else [])
    return [MetricSpec(name) for name in names]


def compute_metric(spec: MetricSpec, data: PredictionSet) -> classify.MetricValue:
    """
    Evaluate one metric on one prediction set

    Raises:
        MetricInfeasible subclasses when the data cannot support the metric
    """
    metric = definition(spec)
    if metric.task != data.task:
        raise ConfigError(f"Metric '{spec.key}' cannot be computed on {data.task.value} data")
    return metric.compute(data, spec)
