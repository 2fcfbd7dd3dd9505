"""
Synthetic Regimes
Seeded generators for the metric-pitfall regimes, reference baseline predictors and analytic oracles
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logit, softmax
from scipy.stats import norm

from .classify import f_beta
from .core import ClassificationData, LabelSpace, RegressionData
from .errors import (
    ConfigError,
    EmptyTraining,
    MissingScores,
    NonPositiveTemperature,
    NotStochastic,
    ParameterOutOfRange,
)

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-9
BINARY_LABELS = LabelSpace(("0", "1"), positive_class="1")

PredictionSet = Union[ClassificationData, RegressionData]


class RegimeKind(Enum):
    IMBALANCED_BINARY = "imbalanced_binary"
    MISCALIBRATED = "miscalibrated"
    MULTICLASS_SKEW = "multiclass_skew"
    HEAVY_TAIL_REGRESSION = "heavy_tail_regression"
    LOW_BASELINE_COUNTS = "low_baseline_counts"
    STRUCTURED_RESIDUALS = "structured_residuals"


class BaselineKind(Enum):
    MAJORITY_CLASS = "majority_class"
    PRIOR_SAMPLER = "prior_sampler"
    MEAN_REGRESSOR = "mean_regressor"


# Parameters accepted by each regime and their defaults
REGIME_DEFAULTS: Dict[RegimeKind, Dict[str, Any]] = {
    RegimeKind.IMBALANCED_BINARY: {"prevalence": 0.05, "separation": 1.5},
    RegimeKind.MISCALIBRATED: {"prevalence": 0.5, "separation": 1.0, "temperature": 0.25},
    RegimeKind.MULTICLASS_SKEW: {
        "prevalences": [0.9, 0.05, 0.05],
        "confusion": [[0.95, 0.025, 0.025], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]],
    },
    RegimeKind.HEAVY_TAIL_REGRESSION: {"outlier_fraction": 0.01, "outlier_scale": 50.0},
    RegimeKind.LOW_BASELINE_COUNTS: {"low_rate": 0.1, "high_rate": 20.0, "low_mix": 0.3},
    RegimeKind.STRUCTURED_RESIDUALS: {"underprediction": 0.2, "heteroscedasticity": 10.0, "noise": 0.1},
}


@dataclass(frozen=True)
class RegimeSpec:
    """A regime kind with its parameters, sample count and seed"""
    kind: RegimeKind
    parameters: Dict[str, Any] = field(default_factory=dict)
    n: int = 10000
    seed: int = 0

    def __post_init__(self):
        kind = RegimeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.n < 1:
            raise ParameterOutOfRange(f"Regime sample count must be >= 1, got {self.n}")
        defaults = REGIME_DEFAULTS[kind]
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ConfigError(f"Regime '{kind.value}' has no parameter(s) {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.parameters)
        object.__setattr__(self, "parameters", merged)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "parameters": dict(self.parameters), "n": self.n, "seed": self.seed}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], seed: Optional[int] = None) -> "RegimeSpec":
        try:
            kind = RegimeKind(payload["kind"])
        except (KeyError, ValueError) as e:
            known = ", ".join(k.value for k in RegimeKind)
            raise ConfigError(f"Regime needs a 'kind' among {known}, got {payload.get('kind')!r}") from e
        return cls(
            kind=kind,
            parameters=dict(payload.get("parameters", {})),
            n=int(payload.get("n", 10000)),
            seed=int(payload.get("seed", seed if seed is not None else 0)),
        )


def _check_n(n: int) -> None:
    if n < 1:
        raise ParameterOutOfRange(f"Sample count must be >= 1, got {n}")


def gen_binary_scores(n: int, prevalence: float, separation: float, seed: int = 0) -> ClassificationData:
    """
    Calibrated binary scores from a two-Gaussian latent model

    Negatives draw z ~ N(0, 1), positives z ~ N(d, 1). The emitted probability is the exact
    posterior expit(d*z + logit(pi) - d^2/2), so it is calibrated by construction and
    the expected ROC AUC is Phi(d / sqrt(2)). Labels are "0"/"1" with "1" positive.
    """
    _check_n(n)
    if not 0.0 < prevalence < 1.0:
        raise ParameterOutOfRange(f"Prevalence must lie in (0, 1), got {prevalence}")
    if not (separation >= 0.0 and math.isfinite(separation)):
        raise ParameterOutOfRange(f"Separation must be a finite value >= 0, got {separation}")

    rng = np.random.default_rng(seed)
    positive = rng.random(n) < prevalence
    z = rng.standard_normal(n) + separation * positive
    p = expit(separation * z + logit(prevalence) - separation ** 2 / 2.0)
    return ClassificationData(
        labels=BINARY_LABELS,
        y_true=np.where(positive, "1", "0"),
        y_score=np.column_stack([1.0 - p, p]),
    )


def expected_auc(separation: float) -> float:
    """Analytic ROC AUC of the two-Gaussian model"""
    return float(norm.cdf(separation / math.sqrt(2.0)))


def apply_temperature(data: ClassificationData, temperature: float) -> ClassificationData:
    """
    Replace each score row p by softmax(log(p) / t)

    t < 1 sharpens, t > 1 flattens. The original hard decisions are kept as explicit
    predictions, so accuracy and the confusion matrix are untouched.
    """
    if not (temperature > 0 and math.isfinite(temperature)):
        raise NonPositiveTemperature(f"Temperature must be a finite positive number, got {temperature}")
    if data.y_score is None:
        raise MissingScores("Temperature scaling needs probability scores")
    if temperature == 1.0:
        return data

    with np.errstate(divide="ignore"):
        log_p = np.log(data.y_score)
    scaled = softmax(log_p / temperature, axis=1)
    y_pred = data.y_pred if data.y_pred is not None else data.labels.decode(data.pred_index)
    return ClassificationData(labels=data.labels, y_true=data.y_true, y_pred=y_pred, y_score=scaled)


def _check_distribution(values: np.ndarray, name: str) -> None:
    if (values < 0).any() or abs(float(values.sum()) - 1.0) > STOCHASTIC_TOLERANCE:
        raise NotStochastic(f"{name} must be non-negative and sum to 1, got {values.tolist()}")


def _check_channel(prevalences: Sequence[float], confusion: Sequence[Sequence[float]]):
    prev = np.asarray(prevalences, dtype=np.float64)
    conf = np.asarray(confusion, dtype=np.float64)
    if prev.ndim != 1 or prev.size < 2:
        raise NotStochastic(f"Prevalences must be a vector of at least 2 entries, got shape {prev.shape}")
    if conf.shape != (prev.size, prev.size):
        raise NotStochastic(f"Confusion must be {prev.size}x{prev.size}, got {conf.shape}")
    _check_distribution(prev, "Prevalences")
    for row, values in enumerate(conf):
        _check_distribution(values, f"Confusion row {row}")
    return prev, conf


def gen_multiclass(
    n: int,
    prevalences: Sequence[float],
    confusion: Sequence[Sequence[float]],
    seed: int = 0,
) -> ClassificationData:
    """
    Labels from `prevalences`, predictions from the true class's confusion row

    Classes are "0" .. "K-1". Predictions are drawn class by class in index order.
    """
    _check_n(n)
    prev, conf = _check_channel(prevalences, confusion)
    K = prev.size
    rng = np.random.default_rng(seed)
    true = rng.choice(K, size=n, p=prev / prev.sum())
    pred = np.empty(n, dtype=np.int64)
    for c in range(K):
        rows = np.flatnonzero(true == c)
        pred[rows] = rng.choice(K, size=rows.size, p=conf[c] / conf[c].sum())
    labels = LabelSpace(tuple(str(c) for c in range(K)))
    return ClassificationData(labels=labels, y_true=labels.decode(true), y_pred=labels.decode(pred))


class AnalyticF(NamedTuple):
    micro: float
    macro: float
    per_class: Dict[str, float]


def analytic_multiclass_f(
    prevalences: Sequence[float],
    confusion: Sequence[Sequence[float]],
    beta: float = 1.0,
) -> AnalyticF:
    """
    Population micro/macro F-beta of the prevalence + confusion channel

    The joint table diag(prevalences) . confusion gives per-class precision and recall;
    micro F equals the expected accuracy (its trace).
    """
    prev, conf = _check_channel(prevalences, confusion)
    joint = prev[:, None] * conf
    predicted = joint.sum(axis=0)
    per_class = {}
    for c in range(prev.size):
        if prev[c] == 0:
            continue
        tp = float(joint[c, c])
        precision = tp / float(predicted[c]) if predicted[c] > 0 else 0.0
        recall = tp / float(prev[c])
        per_class[str(c)] = f_beta(min(precision, 1.0), min(recall, 1.0), beta).value
    micro = float(np.trace(joint))
    macro = math.fsum(per_class.values()) / len(per_class)
    return AnalyticF(micro, macro, per_class)


def gen_heavy_tail_regression(n: int, outlier_fraction: float, outlier_scale: float, seed: int = 0) -> RegressionData:
    """y_pred = 0; residuals N(0, 1) mixed with N(0, s^2) at rate outlier_fraction"""
    _check_n(n)
    if not 0.0 <= outlier_fraction < 1.0:
        raise ParameterOutOfRange(f"Outlier fraction must lie in [0, 1), got {outlier_fraction}")
    if not (outlier_scale > 1.0 and math.isfinite(outlier_scale)):
        raise ParameterOutOfRange(f"Outlier scale must be a finite value > 1, got {outlier_scale}")
    rng = np.random.default_rng(seed)
    outlier = rng.random(n) < outlier_fraction
    residuals = rng.standard_normal(n) * np.where(outlier, outlier_scale, 1.0)
    return RegressionData(y_true=residuals, y_pred=np.zeros(n))


def gen_low_baseline_counts(
    n: int,
    low_rate: float,
    high_rate: float = 20.0,
    low_mix: float = 0.3,
    seed: int = 0,
) -> RegressionData:
    """
    Poisson counts from a low-rate component (share low_mix) and a high-rate one

    Predictions add N(0, 1) noise to the truth, so about low_mix * exp(-low_rate) of the
    targets are exactly zero.
    """
    _check_n(n)
    if not 0.0 <= low_rate < high_rate:
        raise ParameterOutOfRange(f"Rates must satisfy 0 <= low_rate < high_rate, got {low_rate}, {high_rate}")
    if not 0.0 < low_mix < 1.0:
        raise ParameterOutOfRange(f"low_mix must lie in (0, 1), got {low_mix}")
    rng = np.random.default_rng(seed)
    low = rng.random(n) < low_mix
    counts = np.where(low, rng.poisson(low_rate, n), rng.poisson(high_rate, n)).astype(np.float64)
    return RegressionData(y_true=counts, y_pred=counts + rng.standard_normal(n))


def gen_structured_residuals(
    n: int,
    underprediction: float = 0.2,
    heteroscedasticity: float = 10.0,
    noise: float = 0.1,
    seed: int = 0,
) -> RegressionData:
    """
    High-R^2 data whose residuals still carry structure

    x ~ U[0, 10] is the prediction; the truth is x * (1 + underprediction) plus noise whose
    std grows linearly from `noise` at x = 0 to `noise * heteroscedasticity` at x = 10.
    """
    _check_n(n)
    if not math.isfinite(underprediction) or underprediction <= -1.0:
        raise ParameterOutOfRange(f"underprediction must be finite and > -1, got {underprediction}")
    if not (heteroscedasticity >= 1.0 and math.isfinite(heteroscedasticity)):
        raise ParameterOutOfRange(f"heteroscedasticity must be a finite value >= 1, got {heteroscedasticity}")
    if not (noise >= 0.0 and math.isfinite(noise)):
        raise ParameterOutOfRange(f"noise must be a finite value >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 10.0, n)
    spread = noise * (1.0 + (heteroscedasticity - 1.0) * x / 10.0)
    y_true = x * (1.0 + underprediction) + rng.standard_normal(n) * spread
    return RegressionData(y_true=y_true, y_pred=x)


def generate(spec: RegimeSpec) -> PredictionSet:
    """Dispatch a RegimeSpec to its generator"""
    p = spec.parameters
    logger.debug(f"Generating regime {spec.kind.value} n={spec.n} seed={spec.seed} {p}")
    if spec.kind == RegimeKind.IMBALANCED_BINARY:
        return gen_binary_scores(spec.n, float(p["prevalence"]), float(p["separation"]), spec.seed)
    if spec.kind == RegimeKind.MISCALIBRATED:
        data = gen_binary_scores(spec.n, float(p["prevalence"]), float(p["separation"]), spec.seed)
        return apply_temperature(data, float(p["temperature"]))
    if spec.kind == RegimeKind.MULTICLASS_SKEW:
        return gen_multiclass(spec.n, p["prevalences"], p["confusion"], spec.seed)
    if spec.kind == RegimeKind.HEAVY_TAIL_REGRESSION:
        return gen_heavy_tail_regression(spec.n, float(p["outlier_fraction"]), float(p["outlier_scale"]), spec.seed)
    if spec.kind == RegimeKind.LOW_BASELINE_COUNTS:
        return gen_low_baseline_counts(
            spec.n, float(p["low_rate"]), float(p["high_rate"]), float(p["low_mix"]), spec.seed
        )
    return gen_structured_residuals(
        spec.n, float(p["underprediction"]), float(p["heteroscedasticity"]), float(p["noise"]), spec.seed
    )


def baseline_predict(
    kind: Union[BaselineKind, str],
    train: PredictionSet,
    evaluation: PredictionSet,
    seed: int = 0,
) -> PredictionSet:
    """
    Reference predictions for `evaluation` fitted on `train`

    majority_class predicts the modal training label (lowest class index on ties) and scores
    every row with the training prevalences; prior_sampler draws labels from those
    prevalences; mean_regressor predicts the training target mean.
    """
    kind = BaselineKind(kind)
    if len(train) == 0:
        raise EmptyTraining(f"{kind.value} baseline needs a non-empty training view")

    if kind == BaselineKind.MEAN_REGRESSOR:
        if not isinstance(evaluation, RegressionData) or not isinstance(train, RegressionData):
            raise ConfigError("mean_regressor applies to regression data only")
        mean = float(np.mean(train.y_true))
        return RegressionData(y_true=evaluation.y_true, y_pred=np.full(len(evaluation), mean))

    if not isinstance(evaluation, ClassificationData) or not isinstance(train, ClassificationData):
        raise ConfigError(f"{kind.value} applies to classification data only")
    labels = evaluation.labels
    counts = np.bincount(labels.encode(train.y_true), minlength=labels.K)
    prior = counts / counts.sum()
    scores = np.tile(prior, (len(evaluation), 1))

    if kind == BaselineKind.MAJORITY_CLASS:
        predicted = np.full(len(evaluation), int(np.argmax(counts)))
    else:
        predicted = np.random.default_rng(seed).choice(labels.K, size=len(evaluation), p=prior)
    return ClassificationData(
        labels=labels,
        y_true=evaluation.y_true,
        y_pred=labels.decode(predicted),
        y_score=scores,
    )
