"""
Validation Protocols
Hold-out and (stratified) k-fold split generation, and the cross-validation driver
"""

import math
import hashlib
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import (
    ClassificationData,
    EvaluationReport,
    FoldAssignment,
    Protocol,
    Provenance,
    RegressionData,
    TaskType,
    aggregate_folds,
    as_label_array,
    data_fingerprint,
    sort_labels,
    validate_classification,
    validate_regression,
)
from .errors import (
    EmptyFoldSet,
    KOutOfRange,
    LengthMismatch,
    MetricInfeasible,
    MixedTaskTypes,
    RatioOutOfRange,
    TooFewSamples,
)
from .event_log import get_event_logger
from .flags import FlagCode, Severity, make_flag
from .suite import MetricSpec, PredictionSet, compute_metric, parse_suite

logger = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_TEST_RATIO = 0.2


def _holdout_test_count(n: int, test_ratio: float) -> int:
    # round half up, then keep both sides non-empty
    return int(min(max(math.floor(n * test_ratio + 0.5), 1), n - 1))


def _proportional_quota(counts: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder allocation of `total` across classes in proportion to counts"""
    exact = counts * total / counts.sum()
    quota = np.floor(exact).astype(np.int64)
    short = total - int(quota.sum())
    if short > 0:
        # stable sort keeps class order among equal remainders
        order = np.argsort(-(exact - quota), kind="mergesort")
        quota[order[:short]] += 1
    return np.minimum(quota, counts)


def holdout_split(
    n: int,
    test_ratio: float = DEFAULT_TEST_RATIO,
    seed: int = 0,
    stratify_labels: Optional[Sequence[Any]] = None,
) -> FoldAssignment:
    """
    Single train/test partition encoded as a two-fold assignment (fold 1 is the test set)

    Args:
        n: Number of samples
        test_ratio: Fraction held out, strictly between 0 and 1
        seed: Random seed
        stratify_labels: Optional labels; per-class test counts are then proportional within 1

    Returns:
        FoldAssignment with protocol HOLDOUT
    """
    if not 0.0 < test_ratio < 1.0:
        raise RatioOutOfRange(f"test_ratio must lie strictly between 0 and 1, got {test_ratio}")
    if n < 2:
        raise TooFewSamples(f"A hold-out split needs at least 2 samples, got {n}")

    rng = np.random.default_rng(seed)
    n_test = _holdout_test_count(n, test_ratio)
    fold_of = np.zeros(n, dtype=np.int64)

    if stratify_labels is None:
        fold_of[rng.permutation(n)[:n_test]] = 1
    else:
        labels = as_label_array(stratify_labels)
        if labels.shape != (n,):
            raise LengthMismatch(f"Stratification labels have {labels.shape[0]} entries, expected {n}")
        classes = sort_labels(labels.tolist())
        members = [np.flatnonzero(labels == c) for c in classes]
        quota = _proportional_quota(np.array([m.size for m in members]), n_test)
        for index, q in zip(members, quota):
            fold_of[index[rng.permutation(index.size)[:q]]] = 1

    logger.debug(f"Hold-out split: n={n}, test={int(fold_of.sum())}, seed={seed}")
    return FoldAssignment(
        n=n,
        k=2,
        fold_of=fold_of,
        seed=seed,
        stratified=stratify_labels is not None,
        protocol=Protocol.HOLDOUT,
    )


def _check_k(n: int, k: int) -> None:
    if not 2 <= k <= n:
        raise KOutOfRange(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")


def kfold(n: int, k: int = DEFAULT_K, seed: int = 0) -> FoldAssignment:
    """Seeded uniform shuffle dealt round-robin into k folds"""
    _check_k(n, k)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[rng.permutation(n)] = np.arange(n) % k
    return FoldAssignment(n=n, k=k, fold_of=fold_of, seed=seed, stratified=False, protocol=Protocol.KFOLD)


def stratified_kfold(labels: Sequence[Any], k: int = DEFAULT_K, seed: int = 0) -> FoldAssignment:
    """
    Per-class seeded shuffle dealt round-robin, continuing the deal across classes

    Every class is spread over the folds with per-fold counts differing by at most 1,
    and overall fold sizes stay balanced. Classes smaller than k raise SparseClass.
    """
    labels = as_label_array(labels)
    n = int(labels.shape[0])
    _check_k(n, k)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    warnings = []
    offset = 0
    for cls in sort_labels(labels.tolist()):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            warnings.append(FlagCode.SPARSE_CLASS.value)
            logger.warning(f"Class '{cls}' has {members.size} members, fewer than k={k} folds")
        fold_of[members[rng.permutation(members.size)]] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldAssignment(
        n=n,
        k=k,
        fold_of=fold_of,
        seed=seed,
        stratified=True,
        protocol=Protocol.STRATIFIED_KFOLD,
        warnings=tuple(sorted(set(warnings))),
    )


def split_predictions(data: PredictionSet, assignment: FoldAssignment) -> List[PredictionSet]:
    """Test-fold views of a pooled prediction set, one per evaluated fold"""
    if len(data) != assignment.n:
        raise LengthMismatch(f"Assignment covers {assignment.n} rows but the prediction set has {len(data)}")
    return [data.subset(assignment.test_indices(fold)) for fold in assignment.test_folds]


def _validated(fold: PredictionSet) -> PredictionSet:
    if isinstance(fold, ClassificationData):
        return validate_classification(fold)
    return validate_regression(fold)


def _pooled_fingerprint(folds: Sequence[PredictionSet]) -> Dict[str, Any]:
    """Fingerprint of folds supplied without their pooled source"""
    prints = [data_fingerprint(fold) for fold in folds]
    digest = hashlib.sha256("".join(p["data_digest"] for p in prints).encode("ascii")).hexdigest()
    n_rows = sum(p["n_rows"] for p in prints)
    result: Dict[str, Any] = {"n_rows": n_rows, "data_digest": digest}
    if isinstance(folds[0], ClassificationData):
        weighted: Dict[str, float] = defaultdict(float)
        for fold, p in zip(folds, prints):
            for cls, share in p["class_prevalences"].items():
                weighted[cls] += share * len(fold)
        result["class_prevalences"] = {cls: weighted[cls] / n_rows for cls in sort_labels(weighted)}
    else:
        pooled = RegressionData(
            np.concatenate([fold.y_true for fold in folds]),
            np.concatenate([fold.y_pred for fold in folds]),
        )
        result["target_summary"] = data_fingerprint(pooled)["target_summary"]
    return result


def _evaluate_fold(fold: PredictionSet, suite: Sequence[MetricSpec], permissive: bool = False) -> Dict[str, Any]:
    """Metric values keyed by spec key; with permissive, infeasible metrics map to their error"""
    values: Dict[str, Any] = {}
    for spec in suite:
        try:
            values[spec.key] = compute_metric(spec, fold)
        except MetricInfeasible as e:
            if not permissive:
                raise
            values[spec.key] = e
    return values


def cross_validate(
    predictions_per_fold: Sequence[PredictionSet],
    metric_suite: Iterable[Any],
    seed: int = 0,
    protocol: Protocol = Protocol.NONE,
    k: Optional[int] = None,
    model_id: str = "model",
    source: str = "",
    workers: int = 1,
    fold_warnings: Iterable[str] = (),
    source_data: Optional[PredictionSet] = None,
    permissive: bool = False,
) -> EvaluationReport:
    """
    Compute every metric on every fold, then aggregate per metric

    Per-fold evaluation may run on a thread pool; results are collected in fold order
    and aggregation is order-independent, so the report does not depend on workers.

    Args:
        predictions_per_fold: One prediction set per fold, all of the same task
        metric_suite: Metric specifiers (strings, mappings or MetricSpec)
        seed: Seed recorded in provenance
        protocol: How the folds were formed
        k: Fold count recorded in provenance (defaults to the number of folds)
        model_id: Identifier of the evaluated model
        source: Input description recorded in provenance
        workers: Thread count for per-fold evaluation
        fold_warnings: Split-level warnings attached to every metric
        source_data: Pooled data the folds were cut from, fingerprinted when given
        permissive: Record infeasible metrics as MetricInfeasible flags instead of raising

    Returns:
        EvaluationReport without diagnostic flags (apart from MetricInfeasible in permissive mode)

    Raises:
        EmptyFoldSet, MixedTaskTypes, MetricInfeasible
    """
    folds = list(predictions_per_fold)
    if not folds:
        raise EmptyFoldSet("cross_validate needs at least one fold")
    tasks = {fold.task for fold in folds}
    if len(tasks) > 1:
        raise MixedTaskTypes(f"Folds mix task types: {sorted(t.value for t in tasks)}")
    task: TaskType = tasks.pop()
    suite = parse_suite(metric_suite, task)
    folds = [_validated(fold) for fold in folds]

    if workers > 1 and len(folds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_fold = list(pool.map(lambda fold: _evaluate_fold(fold, suite, permissive), folds))
    else:
        per_fold = [_evaluate_fold(fold, suite, permissive) for fold in folds]

    events = get_event_logger()
    split_warnings = tuple(fold_warnings)
    metrics = {}
    infeasible = []
    for spec in suite:
        values = [fold_values[spec.key] for fold_values in per_fold]
        failures = [(i, v) for i, v in enumerate(values) if isinstance(v, MetricInfeasible)]
        if failures:
            fold_index, error = failures[0]
            message = f"{spec.key} is infeasible on fold {fold_index + 1}: {error}"
            logger.warning(message)
            infeasible.append(
                make_flag(
                    FlagCode.METRIC_INFEASIBLE,
                    Severity.WARN,
                    message,
                    failed_folds=len(failures),
                    folds=len(values),
                )
            )
            events.log_error(error, {"model_id": model_id, "metric": spec.key})
            continue
        raised = set(split_warnings)
        for value in values:
            raised.update(value.flags)
        report = aggregate_folds([v.value for v in values], spec.key, raised)
        metrics[spec.key] = report
        events.log_metric(model_id, spec.key, report.mean, len(values))

    fingerprint = data_fingerprint(source_data) if source_data is not None else _pooled_fingerprint(folds)
    provenance = Provenance(
        seed=seed,
        k=k if k is not None else len(folds),
        protocol=protocol,
        n_rows=fingerprint["n_rows"],
        data_digest=fingerprint["data_digest"],
        class_prevalences=fingerprint.get("class_prevalences"),
        target_summary=fingerprint.get("target_summary"),
        source=source,
    )
    logger.info(f"Cross-validated '{model_id}' over {len(folds)} fold(s) with {len(suite)} metric(s)")
    return EvaluationReport(
        task=task, metrics=metrics, flags=tuple(infeasible), provenance=provenance, model_id=model_id
    )


def evaluate_assignment(
    data: PredictionSet,
    assignment: FoldAssignment,
    metric_suite: Iterable[Any],
    model_id: str = "model",
    source: str = "",
    workers: int = 1,
    permissive: bool = False,
) -> EvaluationReport:
    """Cut a pooled prediction set by a fold assignment and cross-validate it"""
    return cross_validate(
        split_predictions(data, assignment),
        metric_suite,
        seed=assignment.seed,
        protocol=assignment.protocol,
        k=assignment.k,
        model_id=model_id,
        source=source,
        workers=workers,
        fold_warnings=assignment.warnings,
        source_data=data,
        permissive=permissive,
    )


def plan_folds(data: PredictionSet, k: int = DEFAULT_K, seed: int = 0) -> FoldAssignment:
    """Default plan: stratified k-fold for classification, plain k-fold for regression"""
    if isinstance(data, ClassificationData):
        return stratified_kfold(data.y_true, k, seed)
    return kfold(len(data), k, seed)


@dataclass(frozen=True)
class ProtocolEstimate:
    metric: str
    holdout: float
    cv_mean: float
    cv_std: float
    cv_min: float
    cv_max: float

    @property
    def deviation_in_std(self) -> Optional[float]:
        """(hold-out - CV mean) / CV std; None when the folds agree exactly"""
        if self.cv_std == 0.0:
            return None
        return (self.holdout - self.cv_mean) / self.cv_std

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric,
            "holdout": self.holdout,
            "cv_mean": self.cv_mean,
            "cv_std": self.cv_std,
            "cv_min": self.cv_min,
            "cv_max": self.cv_max,
            "deviation_in_std": self.deviation_in_std,
        }


@dataclass(frozen=True)
class ProtocolComparison:
    test_ratio: float
    k: int
    seed: int
    estimates: Dict[str, ProtocolEstimate]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "test_ratio": self.test_ratio,
            "k": self.k,
            "seed": self.seed,
            "estimates": {name: e.to_dict() for name, e in self.estimates.items()},
        }


def protocol_comparison(
    data: PredictionSet,
    metric_suite: Iterable[Any],
    test_ratio: float = DEFAULT_TEST_RATIO,
    k: int = DEFAULT_K,
    seed: int = 0,
) -> ProtocolComparison:
    """
    Compare one hold-out estimate with the k-fold spread on the same prediction set

    Classification splits are stratified. A hold-out value several fold-stds away from
    the k-fold mean shows how much a single partition can mislead.
    """
    suite = list(metric_suite)
    stratify = data.y_true if isinstance(data, ClassificationData) else None
    holdout = evaluate_assignment(data, holdout_split(len(data), test_ratio, seed, stratify), suite)
    folds = evaluate_assignment(data, plan_folds(data, k, seed), suite)
    estimates = {
        name: ProtocolEstimate(
            metric=name,
            holdout=holdout.metrics[name].mean,
            cv_mean=report.mean,
            cv_std=report.sample_std,
            cv_min=report.min,
            cv_max=report.max,
        )
        for name, report in folds.metrics.items()
    }
    return ProtocolComparison(test_ratio, k, seed, estimates)
