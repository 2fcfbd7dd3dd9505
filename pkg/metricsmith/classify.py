"""
Classification Metrics
Confusion matrix, accuracy, precision/recall, F-beta, MCC, micro/macro averaging and log loss
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, NamedTuple, Tuple

import numpy as np

from .core import ClassificationData, LabelSpace
from .errors import DataError, EmptyInput, MissingScores, NonPositiveBeta, NoPredictions, NotBinary, ParameterOutOfRange
from .flags import FlagCode

logger = logging.getLogger(__name__)

LOG_LOSS_EPSILON = 1e-15


class AveragingMode(Enum):
    MICRO = "micro"
    MACRO = "macro"


class MetricValue(NamedTuple):
    """A metric value together with the degeneracy codes raised while computing it"""
    value: float
    flags: Tuple[str, ...] = ()


class ClassRates(NamedTuple):
    precision: float
    recall: float
    degenerate: Tuple[str, ...] = ()


class OneVsRest(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """K x K counts; entry (i, j) counts samples of true class i predicted as class j"""
    labels: LabelSpace
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.shape != (self.labels.K, self.labels.K):
            raise DataError(f"Counts must be {self.labels.K}x{self.labels.K}, got {counts.shape}")
        if (counts < 0).any():
            raise DataError("Counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def one_vs_rest(self, index: int) -> OneVsRest:
        tp = int(self.counts[index, index])
        fp = int(self.counts[:, index].sum()) - tp
        fn = int(self.counts[index, :].sum()) - tp
        return OneVsRest(tp, fp, fn, self.n - tp - fp - fn)

    def binary_counts(self) -> OneVsRest:
        """TP/FP/FN/TN under the positive/negative split of a binary task"""
        if not self.labels.is_binary:
            raise NotBinary(f"Binary counts need K=2, got K={self.labels.K}")
        return self.one_vs_rest(self.labels.positive_index)

    def to_dict(self) -> Dict[str, object]:
        return {"classes": list(self.labels.classes), "counts": self.counts.tolist()}


def build_confusion(data: ClassificationData) -> ConfusionMatrix:
    """
    Tabulate every (true, predicted) pair once

    Hard predictions are used when present, otherwise the argmax of the scores.
    Classes absent from the data keep zero rows and columns.
    """
    if not data.has_predictions:
        raise NoPredictions("Cannot build a confusion matrix without predictions")
    K = data.labels.K
    flat = data.true_index * K + data.pred_index
    counts = np.bincount(flat, minlength=K * K).reshape(K, K)
    return ConfusionMatrix(data.labels, counts)


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified samples (trace / n)"""
    if cm.n == 0:
        raise EmptyInput("Accuracy is undefined on an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.n


def _ratio(numerator: int, denominator: int) -> Tuple[float, bool]:
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def class_rates(cm: ConfusionMatrix, cls: object) -> ClassRates:
    """
    Precision and recall of one class against the rest

    A zero denominator yields 0 together with PrecisionUndefined / RecallUndefined.
    """
    counts = cm.one_vs_rest(cm.labels.index(cls))
    precision, p_undefined = _ratio(counts.tp, counts.tp + counts.fp)
    recall, r_undefined = _ratio(counts.tp, counts.tp + counts.fn)
    degenerate = []
    if p_undefined:
        degenerate.append(FlagCode.PRECISION_UNDEFINED.value)
    if r_undefined:
        degenerate.append(FlagCode.RECALL_UNDEFINED.value)
    return ClassRates(precision, recall, tuple(degenerate))


def f_beta(precision: float, recall: float, beta: float = 1.0) -> MetricValue:
    """(1 + b^2) P R / (b^2 P + R); 0 with FScoreUndefined when P = R = 0"""
    if not beta > 0:
        raise NonPositiveBeta(f"beta must be positive, got {beta}")
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ParameterOutOfRange(f"Precision and recall must lie in [0, 1], got P={precision}, R={recall}")
    if precision == 0.0 and recall == 0.0:
        return MetricValue(0.0, (FlagCode.FSCORE_UNDEFINED.value,))
    if precision == recall:
        return MetricValue(precision)
    b2 = beta * beta
    return MetricValue((1.0 + b2) * precision * recall / (b2 * precision + recall))


def class_f_beta(cm: ConfusionMatrix, cls: object, beta: float = 1.0) -> MetricValue:
    rates = class_rates(cm, cls)
    score = f_beta(rates.precision, rates.recall, beta)
    return MetricValue(score.value, rates.degenerate + score.flags)


def mcc(cm: ConfusionMatrix) -> MetricValue:
    """Matthews correlation of a binary table; 0 with MccUndefined when a margin is empty"""
    if not cm.labels.is_binary:
        raise NotBinary(f"MCC is defined for binary tasks only, got K={cm.labels.K}")
    tp, fp, fn, tn = cm.binary_counts()
    factors = (tp + fp, tp + fn, tn + fp, tn + fn)
    if 0 in factors:
        return MetricValue(0.0, (FlagCode.MCC_UNDEFINED.value,))
    numerator = tp * tn - fp * fn
    denominator = math.sqrt(float(factors[0]) * factors[1] * factors[2] * factors[3])
    return MetricValue(max(-1.0, min(1.0, numerator / denominator)))


def per_class_f_beta(cm: ConfusionMatrix, beta: float = 1.0) -> Dict[str, MetricValue]:
    return {cls: class_f_beta(cm, cls, beta) for cls in cm.labels.classes}


def averaged_f_beta(cm: ConfusionMatrix, beta: float = 1.0, mode: AveragingMode = AveragingMode.MACRO) -> MetricValue:
    """
    Micro or macro averaged F-beta

    Micro pools one-vs-rest TP/FP/FN over all classes, which for single-label data makes
    P = R = accuracy. Macro averages per-class F over classes with non-zero support; the
    excluded classes are reported as ZeroSupportClass.
    """
    mode = AveragingMode(mode)
    if mode == AveragingMode.MICRO:
        tp = int(np.trace(cm.counts))
        off_diagonal = cm.n - tp
        precision, _ = _ratio(tp, tp + off_diagonal)
        recall, _ = _ratio(tp, tp + off_diagonal)
        return f_beta(precision, recall, beta)

    support = cm.support()
    values = []
    codes = set()
    for index, cls in enumerate(cm.labels.classes):
        if support[index] == 0:
            codes.add(FlagCode.ZERO_SUPPORT_CLASS.value)
            logger.debug(f"Macro average excludes class '{cls}' with zero support")
            continue
        score = class_f_beta(cm, cls, beta)
        values.append(score.value)
        codes.update(score.flags)
    if not values:
        return MetricValue(0.0, tuple(sorted(codes)))
    return MetricValue(math.fsum(values) / len(values), tuple(sorted(codes)))


def log_loss(data: ClassificationData, epsilon: float = LOG_LOSS_EPSILON) -> float:
    """Mean negative natural log of the probability given to the true class, clipped to [eps, 1 - eps]"""
    if data.y_score is None:
        raise MissingScores("Log loss requires probability scores")
    p = data.y_score[np.arange(len(data)), data.true_index]
    p = np.clip(p, epsilon, 1.0 - epsilon)
    return float(-np.mean(np.log(p)))
