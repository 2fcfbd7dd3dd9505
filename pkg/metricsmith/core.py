"""
Core Data Model
Labels, prediction sets, fold assignments and evaluation reports shared by every module
"""

import math
import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DataError,
    EmptyInput,
    InvalidLabelSpace,
    LengthMismatch,
    MissingScores,
    NoPredictions,
    NonFiniteValue,
    NotBinary,
    ScoreRowNotNormalized,
    UnknownLabel,
)
from .flags import DiagnosticFlag, FlagCode

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-6
AGGREGATION_CONVENTION = "mean_of_fold_metrics"


class TaskType(Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class Protocol(Enum):
    """How the evaluated folds were formed"""
    HOLDOUT = "holdout"
    KFOLD = "kfold"
    STRATIFIED_KFOLD = "stratified_kfold"
    NONE = "none"  # folds supplied pre-split


class Direction(Enum):
    """Which way a metric improves"""
    HIGHER_BETTER = "higher_better"
    LOWER_BETTER = "lower_better"


def canonical_label(value: Any) -> str:
    """Integers (and integral floats) become their decimal text, everything else its str()"""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)) and float(value).is_integer():
        return str(int(value))
    return str(value)


def as_label_array(values: Iterable[Any]) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind in "iub":
        return arr.astype(np.int64).astype(str)
    if arr.dtype.kind == "U":
        return arr
    return np.array([canonical_label(v) for v in arr.ravel()], dtype=str).reshape(arr.shape)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _label_sort_key(label: str) -> Tuple[int, Any]:
    try:
        return (0, int(label))
    except ValueError:
        return (1, label)


def sort_labels(labels: Iterable[str]) -> Tuple[str, ...]:
    """Distinct labels in canonical order: integers numerically first, then text"""
    return tuple(sorted(set(labels), key=_label_sort_key))


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class identifiers plus the positive class of a binary task"""
    classes: Tuple[str, ...]
    positive_class: Optional[str] = None

    def __post_init__(self):
        classes = tuple(canonical_label(c) for c in self.classes)
        object.__setattr__(self, "classes", classes)
        if len(classes) < 2:
            raise InvalidLabelSpace(f"A label space needs at least 2 classes, got {list(classes)}")
        if len(set(classes)) != len(classes):
            raise InvalidLabelSpace(f"Class identifiers must be distinct, got {list(classes)}")
        if self.positive_class is not None:
            positive = canonical_label(self.positive_class)
            object.__setattr__(self, "positive_class", positive)
            if positive not in classes:
                raise InvalidLabelSpace(f"Positive class '{positive}' is not one of {list(classes)}")
            if len(classes) != 2:
                raise InvalidLabelSpace("A positive class can only be designated for binary tasks")

    @classmethod
    def infer(cls, *label_sequences: Iterable[Any], positive_class: Optional[str] = None) -> "LabelSpace":
        """Build a label space from observed labels; numeric labels sort numerically"""
        seen = set()
        for values in label_sequences:
            if values is None:
                continue
            seen.update(as_label_array(values).tolist())
        return cls(sort_labels(seen), positive_class)

    @property
    def K(self) -> int:
        return len(self.classes)

    @property
    def is_binary(self) -> bool:
        return self.K == 2

    @property
    def positive(self) -> str:
        """Designated positive class; binary spaces default to the second class"""
        if not self.is_binary:
            raise NotBinary(f"Positive class is only defined for binary tasks (K={self.K})")
        return self.positive_class if self.positive_class is not None else self.classes[1]

    @property
    def positive_index(self) -> int:
        return self.classes.index(self.positive)

    def index(self, label: Any) -> int:
        label = canonical_label(label)
        try:
            return self.classes.index(label)
        except ValueError:
            raise UnknownLabel(f"Label '{label}' is not in the label space {list(self.classes)}") from None

    def encode(self, values: Iterable[Any]) -> np.ndarray:
        """Map identifiers to class indices"""
        values = as_label_array(values)
        if values.size == 0:
            return np.zeros(0, dtype=np.int64)
        classes = np.asarray(self.classes)
        order = np.argsort(classes)
        pos = np.clip(np.searchsorted(classes, values, sorter=order), 0, len(order) - 1)
        idx = order[pos]
        bad = classes[idx] != values
        if bad.any():
            raise UnknownLabel(f"Label '{values[bad][0]}' is not in the label space {list(self.classes)}")
        return idx.astype(np.int64)

    def decode(self, indices: Iterable[int]) -> np.ndarray:
        return np.asarray(self.classes)[np.asarray(indices, dtype=np.int64)]

    def to_dict(self) -> Dict[str, Any]:
        return {"classes": list(self.classes), "positive_class": self.positive_class}


@dataclass(frozen=True, eq=False)
class ClassificationData:
    """Aligned true labels, optional hard predictions and optional per-class scores"""
    labels: LabelSpace
    y_true: np.ndarray
    y_pred: Optional[np.ndarray] = None
    y_score: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "y_true", _frozen(as_label_array(self.y_true)))
        if self.y_pred is not None:
            object.__setattr__(self, "y_pred", _frozen(as_label_array(self.y_pred)))
        if self.y_score is not None:
            try:
                scores = np.asarray(self.y_score, dtype=np.float64)
            except (TypeError, ValueError) as e:
                raise DataError(f"Scores must be numeric: {e}") from e
            object.__setattr__(self, "y_score", _frozen(scores))

    def __len__(self) -> int:
        return int(self.y_true.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    @property
    def task(self) -> TaskType:
        return TaskType.CLASSIFICATION

    @property
    def has_predictions(self) -> bool:
        return self.y_pred is not None or self.y_score is not None

    @cached_property
    def true_index(self) -> np.ndarray:
        return self.labels.encode(self.y_true)

    @cached_property
    def pred_index(self) -> np.ndarray:
        """Hard predictions as class indices; argmax of scores (lowest index wins ties) when absent"""
        if self.y_pred is not None:
            return self.labels.encode(self.y_pred)
        if self.y_score is not None:
            return np.argmax(self.y_score, axis=1).astype(np.int64)
        raise NoPredictions("Prediction set carries neither hard predictions nor scores")

    def positive_scores(self) -> np.ndarray:
        """Score column of the positive class (binary tasks)"""
        if self.y_score is None:
            raise MissingScores("Prediction set carries no probability scores")
        return self.y_score[:, self.labels.positive_index]

    def subset(self, indices: Sequence[int]) -> "ClassificationData":
        idx = np.asarray(indices, dtype=np.int64)
        return ClassificationData(
            labels=self.labels,
            y_true=self.y_true[idx],
            y_pred=None if self.y_pred is None else self.y_pred[idx],
            y_score=None if self.y_score is None else self.y_score[idx],
        )

    def prevalences(self) -> Dict[str, float]:
        counts = np.bincount(self.true_index, minlength=self.labels.K)
        total = max(len(self), 1)
        return {c: float(counts[i]) / total for i, c in enumerate(self.labels.classes)}


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Aligned true and predicted real targets"""
    y_true: np.ndarray
    y_pred: np.ndarray

    def __post_init__(self):
        for name in ("y_true", "y_pred"):
            try:
                values = np.asarray(getattr(self, name), dtype=np.float64)
            except (TypeError, ValueError) as e:
                raise DataError(f"{name} must be numeric: {e}") from e
            object.__setattr__(self, name, _frozen(values))

    def __len__(self) -> int:
        return int(self.y_true.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    @property
    def task(self) -> TaskType:
        return TaskType.REGRESSION

    @property
    def residuals(self) -> np.ndarray:
        """y_true - y_pred; positive means underprediction"""
        return self.y_true - self.y_pred

    def subset(self, indices: Sequence[int]) -> "RegressionData":
        idx = np.asarray(indices, dtype=np.int64)
        return RegressionData(self.y_true[idx], self.y_pred[idx])


def validate_classification(data: ClassificationData) -> ClassificationData:
    """
    Check every ClassificationData invariant

    Rows of scores within SCORE_TOLERANCE of 1 are renormalized exactly; the input object
    is returned untouched when nothing needed renormalizing.

    Raises:
        LengthMismatch, UnknownLabel, ScoreRowNotNormalized, NoPredictions, EmptyInput, NonFiniteValue
    """
    if data.y_true.ndim != 1:
        raise LengthMismatch(f"y_true must be one-dimensional, got shape {data.y_true.shape}")
    n = len(data)
    if n < 1:
        raise EmptyInput("Prediction set has no rows")
    if not data.has_predictions:
        raise NoPredictions("At least one of y_pred or y_score is required")

    data.labels.encode(data.y_true)
    if data.y_pred is not None:
        if data.y_pred.shape != (n,):
            raise LengthMismatch(f"y_pred has {data.y_pred.shape[0] if data.y_pred.ndim else 0} rows, expected {n}")
        data.labels.encode(data.y_pred)

    if data.y_score is None:
        return data

    scores = data.y_score
    if scores.shape != (n, data.labels.K):
        raise LengthMismatch(f"y_score has shape {scores.shape}, expected ({n}, {data.labels.K})")
    finite = np.isfinite(scores)
    if not finite.all():
        row = int(np.argwhere(~finite)[0][0])
        raise NonFiniteValue(f"Score row {row + 1} contains a non-finite value")
    outside = (scores < 0.0) | (scores > 1.0)
    if outside.any():
        row = int(np.argwhere(outside)[0][0])
        raise ScoreRowNotNormalized(f"Score row {row + 1} has a probability outside [0, 1]")
    sums = scores.sum(axis=1)
    deviation = np.abs(sums - 1.0)
    if (deviation > SCORE_TOLERANCE).any():
        row = int(np.argmax(deviation > SCORE_TOLERANCE))
        raise ScoreRowNotNormalized(f"Score row {row + 1} sums to {sums[row]:.9g}, not 1 within {SCORE_TOLERANCE}")
    if np.all(sums == 1.0):
        return data
    logger.debug(f"Renormalizing {int(np.count_nonzero(sums != 1.0))} score rows within tolerance")
    return replace(data, y_score=scores / sums[:, None])


def validate_regression(data: RegressionData) -> RegressionData:
    """Check equal lengths, at least one row and finite values"""
    if data.y_true.ndim != 1 or data.y_pred.ndim != 1:
        raise LengthMismatch("Regression targets must be one-dimensional")
    if data.y_true.shape != data.y_pred.shape:
        raise LengthMismatch(f"y_true has {data.y_true.shape[0]} rows but y_pred has {data.y_pred.shape[0]}")
    if len(data) < 1:
        raise EmptyInput("Prediction set has no rows")
    for name in ("y_true", "y_pred"):
        values = getattr(data, name)
        finite = np.isfinite(values)
        if not finite.all():
            row = int(np.argmin(finite))
            raise NonFiniteValue(f"{name} row {row + 1} is not finite ({values[row]})")
    return data


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Deterministic partition of sample indices into k mutually exclusive test sets"""
    n: int
    k: int
    fold_of: np.ndarray
    seed: int
    stratified: bool
    protocol: Protocol = Protocol.KFOLD
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.int64)
        object.__setattr__(self, "fold_of", _frozen(fold_of))
        if fold_of.shape != (self.n,):
            raise LengthMismatch(f"fold_of has {fold_of.shape[0]} entries, expected {self.n}")
        if self.n and (fold_of.min() < 0 or fold_of.max() >= self.k):
            raise DataError(f"Fold indices must lie in [0, {self.k})")
        sizes = np.bincount(fold_of, minlength=self.k)
        if (sizes == 0).any():
            raise DataError(f"Every fold must be non-empty, got sizes {sizes.tolist()}")
        if self.protocol == Protocol.KFOLD and sizes.max() - sizes.min() > 1:
            raise DataError(f"Unstratified fold sizes must differ by at most 1, got {sizes.tolist()}")

    @property
    def test_folds(self) -> Tuple[int, ...]:
        """Folds that are evaluated; a hold-out split evaluates fold 1 only"""
        if self.protocol == Protocol.HOLDOUT:
            return (1,)
        return tuple(range(self.k))

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def splits(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Yield (train, test) index arrays for each evaluated fold"""
        for fold in self.test_folds:
            yield self.train_indices(fold), self.test_indices(fold)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "stratified": self.stratified,
            "protocol": self.protocol.value,
            "fold_sizes": self.fold_sizes().tolist(),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class MetricReport:
    """Per-fold values of one metric and their summary statistics"""
    metric_name: str
    per_fold: Tuple[float, ...]
    mean: float
    sample_std: float
    min: float
    max: float
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_fold": [float(v) for v in self.per_fold],
            "mean": float(self.mean),
            "std": float(self.sample_std),
            "min": float(self.min),
            "max": float(self.max),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, name: str, payload: Mapping[str, Any]) -> "MetricReport":
        return cls(
            metric_name=name,
            per_fold=tuple(float(v) for v in payload["per_fold"]),
            mean=float(payload["mean"]),
            sample_std=float(payload["std"]),
            min=float(payload["min"]),
            max=float(payload["max"]),
            warnings=tuple(payload.get("warnings", ())),
        )


def aggregate_folds(
    values: Sequence[float],
    metric_name: str = "",
    warnings: Iterable[str] = (),
) -> MetricReport:
    """
    Summarize fold-level metric values

    Sums use math.fsum so the statistics do not depend on fold order. The standard
    deviation uses the (m - 1) denominator; a single value gets std 0 and a SingleFold warning.

    Raises:
        EmptyInput, NonFiniteValue
    """
    vals = [float(v) for v in values]
    if not vals:
        raise EmptyInput(f"No fold values to aggregate for '{metric_name}'")
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteValue(f"Fold values for '{metric_name}' must be finite, got {vals}")

    m = len(vals)
    mean = math.fsum(vals) / m
    codes = set(warnings)
    if m >= 2:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (m - 1))
    else:
        std = 0.0
        codes.add(FlagCode.SINGLE_FOLD.value)

    return MetricReport(
        metric_name=metric_name,
        per_fold=tuple(vals),
        mean=mean,
        sample_std=std,
        min=min(vals),
        max=max(vals),
        warnings=tuple(sorted(codes)),
    )


def data_fingerprint(data: Any) -> Dict[str, Any]:
    """Row count, class prevalences or target summary, and a SHA-256 digest of the content"""
    digest = hashlib.sha256()
    if isinstance(data, ClassificationData):
        digest.update("\x1f".join(data.labels.classes).encode("utf-8"))
        digest.update("\n".join(data.y_true.tolist()).encode("utf-8"))
        if data.y_pred is not None:
            digest.update(b"\x00pred")
            digest.update("\n".join(data.y_pred.tolist()).encode("utf-8"))
        if data.y_score is not None:
            digest.update(b"\x00score")
            digest.update(np.ascontiguousarray(data.y_score, dtype="<f8").tobytes())
        return {
            "n_rows": len(data),
            "class_prevalences": data.prevalences(),
            "data_digest": digest.hexdigest(),
        }
    digest.update(np.ascontiguousarray(data.y_true, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(data.y_pred, dtype="<f8").tobytes())
    y = data.y_true
    summary = {}
    if len(y):
        summary = {
            "mean": float(np.mean(y)),
            "std": float(np.std(y)),
            "min": float(np.min(y)),
            "median": float(np.median(y)),
            "max": float(np.max(y)),
        }
    return {"n_rows": len(data), "target_summary": summary, "data_digest": digest.hexdigest()}


@dataclass(frozen=True)
class Provenance:
    """Where a report's numbers came from"""
    seed: int
    k: int
    protocol: Protocol
    n_rows: int
    data_digest: str = ""
    class_prevalences: Optional[Dict[str, float]] = None
    target_summary: Optional[Dict[str, float]] = None
    source: str = ""
    aggregation: str = AGGREGATION_CONVENTION

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "seed": self.seed,
            "k": self.k,
            "protocol": self.protocol.value,
            "aggregation": self.aggregation,
            "source": self.source,
            "n_rows": self.n_rows,
        }
        if self.class_prevalences is not None:
            payload["class_prevalences"] = dict(self.class_prevalences)
        if self.target_summary is not None:
            payload["target_summary"] = dict(self.target_summary)
        payload["data_digest"] = self.data_digest
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Provenance":
        return cls(
            seed=int(payload["seed"]),
            k=int(payload["k"]),
            protocol=Protocol(payload["protocol"]),
            n_rows=int(payload["n_rows"]),
            data_digest=payload.get("data_digest", ""),
            class_prevalences=payload.get("class_prevalences"),
            target_summary=payload.get("target_summary"),
            source=payload.get("source", ""),
            aggregation=payload.get("aggregation", AGGREGATION_CONVENTION),
        )


@dataclass(frozen=True)
class EvaluationReport:
    """Per-fold and aggregated metrics, diagnostic flags and provenance for one model"""
    task: TaskType
    metrics: Dict[str, MetricReport]
    flags: Tuple[DiagnosticFlag, ...]
    provenance: Provenance
    model_id: str = "model"
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance is None:
            raise DataError("Every report must carry provenance")
        object.__setattr__(self, "flags", tuple(self.flags))

    def metric_mean(self, name: str) -> Optional[float]:
        report = self.metrics.get(name)
        return None if report is None else report.mean

    def flag_codes(self) -> List[str]:
        return [flag.code.value for flag in self.flags]

    def with_flags(self, extra: Iterable[DiagnosticFlag]) -> "EvaluationReport":
        return replace(self, flags=self.flags + tuple(extra))

    def with_details(self, **details: Any) -> "EvaluationReport":
        merged = dict(self.details)
        merged.update(details)
        return replace(self, details=merged)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task": self.task.value,
            "provenance": self.provenance.to_dict(),
            "metrics": {name: report.to_dict() for name, report in self.metrics.items()},
            "flags": [flag.to_dict() for flag in self.flags],
            "model_id": self.model_id,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "EvaluationReport":
        return cls(
            task=TaskType(payload["task"]),
            metrics={name: MetricReport.from_dict(name, m) for name, m in payload["metrics"].items()},
            flags=tuple(DiagnosticFlag.from_dict(f) for f in payload.get("flags", [])),
            provenance=Provenance.from_dict(payload["provenance"]),
            model_id=payload.get("model_id", "model"),
            details=dict(payload.get("details", {})),
        )
