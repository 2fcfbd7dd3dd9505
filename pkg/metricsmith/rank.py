"""
Ranking Metrics
ROC and precision-recall curves over distinct score thresholds, their areas, and decision-threshold tuning
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, NamedTuple, Union

import numpy as np
from scipy.stats import rankdata

from .classify import f_beta
from .core import as_label_array, canonical_label
from .errors import (
    LengthMismatch,
    NonFiniteValue,
    NonPositiveBeta,
    NoPositives,
    ParameterOutOfRange,
    SingleClassInput,
    UnreachableTarget,
    WrongCurveKind,
)

logger = logging.getLogger(__name__)

# Ties within this tolerance count as equal when picking the best operating point
_TIE_TOLERANCE = 1e-12


class CurveKind(Enum):
    ROC = "roc"
    PR = "pr"


class CurvePoint(NamedTuple):
    x: float
    y: float
    threshold: float


@dataclass(frozen=True, eq=False)
class CurvePoints:
    """
    Curve ordered by descending threshold, starting at the +inf sentinel

    For ROC, x is the false positive rate and y the true positive rate.
    For PR, x is recall and y precision.
    """
    kind: CurveKind
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> List[CurvePoint]:
        return [CurvePoint(float(a), float(b), float(t)) for a, b, t in zip(self.x, self.y, self.thresholds)]

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def rows(self) -> List[Dict[str, float]]:
        return [{"x": p.x, "y": p.y, "threshold": p.threshold} for p in self.points]


class _Sweep(NamedTuple):
    thresholds: np.ndarray  # distinct scores, descending
    tps: np.ndarray
    fps: np.ndarray
    n_pos: int
    n_neg: int


def _binary_truth(y_true: Iterable[Any], positive: Any) -> np.ndarray:
    return as_label_array(y_true) == canonical_label(positive)


def _sweep(y_true: Iterable[Any], score: Iterable[float], positive: Any) -> _Sweep:
    """Cumulative TP/FP counts at each distinct score, highest score first"""
    truth = _binary_truth(y_true, positive)
    score = np.asarray(score, dtype=np.float64)
    if truth.shape != score.shape or truth.ndim != 1:
        raise LengthMismatch(f"Labels ({truth.shape}) and scores ({score.shape}) must be aligned 1-D sequences")
    if not np.isfinite(score).all():
        raise NonFiniteValue("Scores must be finite")

    order = np.argsort(-score, kind="mergesort")
    score = score[order]
    truth = truth[order]
    # last index of every block of tied scores
    distinct = np.flatnonzero(np.diff(score))
    ends = np.r_[distinct, truth.size - 1]
    tps = np.cumsum(truth)[ends]
    fps = (ends + 1) - tps
    n_pos = int(truth.sum())
    return _Sweep(score[ends], tps.astype(np.int64), fps.astype(np.int64), n_pos, int(truth.size) - n_pos)


def roc_curve(y_true: Iterable[Any], score: Iterable[float], positive: Any) -> CurvePoints:
    """
    ROC points at every distinct score plus the (0, 0) sentinel at +inf

    Tied scores collapse into one diagonal step, which credits tied positive/negative pairs with 1/2.
    """
    sweep = _sweep(y_true, score, positive)
    if sweep.n_pos == 0 or sweep.n_neg == 0:
        raise SingleClassInput("ROC curve needs both positive and negative samples")
    fpr = np.r_[0.0, sweep.fps / sweep.n_neg]
    tpr = np.r_[0.0, sweep.tps / sweep.n_pos]
    thresholds = np.r_[np.inf, sweep.thresholds]
    return CurvePoints(CurveKind.ROC, fpr, tpr, thresholds)


def roc_auc(curve: CurvePoints) -> float:
    """Trapezoidal area under a ROC curve"""
    if curve.kind != CurveKind.ROC:
        raise WrongCurveKind(f"roc_auc needs a ROC curve, got {curve.kind.value}")
    widths = np.diff(curve.x)
    heights = (curve.y[1:] + curve.y[:-1]) / 2.0
    return float(np.sum(widths * heights))


def pr_curve(y_true: Iterable[Any], score: Iterable[float], positive: Any) -> CurvePoints:
    """Precision-recall points at every distinct score; the +inf sentinel sits at recall 0, precision 1"""
    sweep = _sweep(y_true, score, positive)
    if sweep.n_pos == 0:
        raise NoPositives("Precision-recall curve needs at least one positive sample")
    precision = sweep.tps / (sweep.tps + sweep.fps)
    recall = sweep.tps / sweep.n_pos
    return CurvePoints(
        CurveKind.PR,
        np.r_[0.0, recall],
        np.r_[1.0, precision],
        np.r_[np.inf, sweep.thresholds],
    )


def pr_auc(curve: CurvePoints) -> float:
    """Average precision: sum of (R_i - R_{i-1}) * P_i, no interpolation between points"""
    if curve.kind != CurveKind.PR:
        raise WrongCurveKind(f"pr_auc needs a PR curve, got {curve.kind.value}")
    return float(np.sum(np.diff(curve.x) * curve.y[1:]))


def binarize(score: Iterable[float], threshold: float) -> np.ndarray:
    """Positive decision wherever score >= threshold"""
    return np.asarray(score, dtype=np.float64) >= threshold


@dataclass(frozen=True)
class MaxFBeta:
    beta: float = 1.0

    def describe(self) -> str:
        return f"max_f_beta(beta={self.beta:g})"


@dataclass(frozen=True)
class MinRecall:
    target: float

    def describe(self) -> str:
        return f"min_recall(target={self.target:g})"


TuningObjective = Union[MaxFBeta, MinRecall]


@dataclass(frozen=True)
class ThresholdChoice:
    """Operating point picked by tune_threshold"""
    objective: str
    threshold: float
    precision: float
    recall: float
    f_beta: float
    beta: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "objective": self.objective,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f_beta": self.f_beta,
            "beta": self.beta,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


def _pick(candidates: np.ndarray, primary: np.ndarray, secondary: np.ndarray, prefer_low_threshold: bool,
          thresholds: np.ndarray) -> int:
    """Index maximizing primary, then secondary, then the preferred threshold direction"""
    pool = candidates[primary[candidates] >= primary[candidates].max() - _TIE_TOLERANCE]
    pool = pool[secondary[pool] >= secondary[pool].max() - _TIE_TOLERANCE]
    if prefer_low_threshold:
        return int(pool[np.argmin(thresholds[pool])])
    return int(pool[np.argmax(thresholds[pool])])


def tune_threshold(
    y_true: Iterable[Any],
    score: Iterable[float],
    positive: Any,
    objective: TuningObjective,
) -> ThresholdChoice:
    """
    Choose a decision threshold among the observed scores

    Args:
        y_true: True labels
        score: Scores for the positive class; decisions use score >= threshold
        positive: Positive class identifier
        objective: MaxFBeta (ties go to higher recall, then lower threshold) or
            MinRecall (highest precision among thresholds meeting the recall floor,
            ties go to the higher threshold)

    Returns:
        ThresholdChoice
    """
    sweep = _sweep(y_true, score, positive)
    if sweep.n_pos == 0 or sweep.n_neg == 0:
        raise SingleClassInput("Threshold tuning needs both positive and negative samples")

    precision = sweep.tps / (sweep.tps + sweep.fps)
    recall = sweep.tps / sweep.n_pos
    everything = np.arange(sweep.thresholds.size)

    if isinstance(objective, MaxFBeta):
        beta = float(objective.beta)
        if not beta > 0:
            raise NonPositiveBeta(f"beta must be positive, got {beta}")
        scores = np.array([f_beta(p, r, beta).value for p, r in zip(precision, recall)])
        best = _pick(everything, scores, recall, True, sweep.thresholds)
    elif isinstance(objective, MinRecall):
        target = float(objective.target)
        if not 0.0 < target <= 1.0:
            raise ParameterOutOfRange(f"Recall target must lie in (0, 1], got {target}")
        beta = 1.0
        feasible = everything[recall >= target]
        if feasible.size == 0:
            raise UnreachableTarget(f"No threshold reaches recall {target}")
        best = _pick(feasible, precision, np.zeros_like(precision), False, sweep.thresholds)
    else:
        raise ParameterOutOfRange(f"Unknown tuning objective {objective!r}")

    tp = int(sweep.tps[best])
    fp = int(sweep.fps[best])
    choice = ThresholdChoice(
        objective=objective.describe(),
        threshold=float(sweep.thresholds[best]),
        precision=float(precision[best]),
        recall=float(recall[best]),
        f_beta=f_beta(float(precision[best]), float(recall[best]), beta).value,
        beta=beta,
        tp=tp,
        fp=fp,
        fn=sweep.n_pos - tp,
        tn=sweep.n_neg - fp,
    )
    logger.debug(
        f"Tuned threshold {choice.threshold:.6g} for {choice.objective}: "
        f"P={choice.precision:.4f}, R={choice.recall:.4f}"
    )
    return choice


def mann_whitney_auc(y_true: Iterable[Any], score: Iterable[float], positive: Any) -> float:
    """Rank-sum form of ROC AUC with midranks for ties (independent of the curve construction)"""
    truth = _binary_truth(y_true, positive)
    score = np.asarray(score, dtype=np.float64)
    n_pos = int(truth.sum())
    n_neg = int(truth.size) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("AUC needs both positive and negative samples")
    ranks = rankdata(score)
    u = float(np.sum(ranks[truth])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)

