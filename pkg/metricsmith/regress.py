"""
Regression Metrics
MAE, RMSE, R^2, MAPE with auditable near-zero exclusion, and binned residual diagnostics
"""

import math
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .core import RegressionData
from .errors import AllTargetsNearZero, ConstantTarget, NoUsableBins, ParameterOutOfRange, TooFewSamples
from .flags import DiagnosticFlag, FlagCode, Severity, make_flag

logger = logging.getLogger(__name__)

DEFAULT_MAPE_EPSILON = 1e-12
DEFAULT_TREND_FRACTION = 0.8
DEFAULT_HETEROSCEDASTIC_RATIO = 3.0


def mae(data: RegressionData) -> float:
    """Mean absolute residual"""
    return float(np.mean(np.abs(data.residuals)))


def rmse(data: RegressionData) -> float:
    """Root of the mean squared residual"""
    return float(math.sqrt(np.mean(np.square(data.residuals))))


def r_squared(data: RegressionData) -> float:
    """
    1 - SS_res / SS_tot against the mean of the evaluated targets

    Negative values are legal: the predictions did worse than predicting the mean.
    """
    y = data.y_true
    y_bar = np.mean(y)
    ss_tot = float(np.sum(np.square(y - y_bar)))
    if ss_tot == 0.0:
        raise ConstantTarget("R^2 is undefined when every target has the same value")
    ss_res = float(np.sum(np.square(y - data.y_pred)))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MapeResult:
    value_percent: float
    excluded_fraction: float
    warnings: Tuple[str, ...] = ()


def mape(data: RegressionData, epsilon: float = DEFAULT_MAPE_EPSILON) -> MapeResult:
    """
    Mean absolute percentage error over rows with |y| >= epsilon

    Rows below epsilon are excluded, not padded; their share is reported as excluded_fraction.
    """
    if not epsilon > 0:
        raise ParameterOutOfRange(f"MAPE epsilon must be positive, got {epsilon}")
    magnitude = np.abs(data.y_true)
    included = magnitude >= epsilon
    if not included.any():
        raise AllTargetsNearZero(f"Every target has |y| < {epsilon:g}; MAPE is undefined")
    relative = np.abs(data.residuals[included]) / magnitude[included]
    excluded_fraction = 1.0 - float(np.count_nonzero(included)) / len(data)
    warnings: Tuple[str, ...] = ()
    if excluded_fraction > 0:
        warnings = (FlagCode.MAPE_TARGETS_EXCLUDED.value,)
        logger.warning(f"MAPE excluded {excluded_fraction:.2%} of rows with |y| < {epsilon:g}")
    return MapeResult(100.0 * float(np.mean(relative)), excluded_fraction, warnings)


@dataclass(frozen=True)
class ResidualBin:
    lower: float
    upper: float
    count: int
    mean_residual: float
    std_residual: float
    mean_predicted: float

    @property
    def mid(self) -> float:
        return (self.lower + self.upper) / 2.0


@dataclass(frozen=True)
class ResidualTable:
    """Residuals (y_true - y_pred) grouped by equal-width bins of the predicted value"""
    bin_edges: Tuple[float, ...]
    bins: Tuple[ResidualBin, ...]
    warnings: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return sum(b.count for b in self.bins)

    def non_empty(self) -> List[ResidualBin]:
        return [b for b in self.bins if b.count > 0]

    def rows(self) -> List[Dict[str, float]]:
        return [
            {
                "bin_mid": b.mid,
                "mean_residual": b.mean_residual,
                "std_residual": b.std_residual,
                "count": b.count,
            }
            for b in self.bins
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bin_edges": list(self.bin_edges),
            "bins": [
                {
                    "lower": b.lower,
                    "upper": b.upper,
                    "count": b.count,
                    "mean_residual": None if math.isnan(b.mean_residual) else b.mean_residual,
                    "std_residual": None if math.isnan(b.std_residual) else b.std_residual,
                    "mean_predicted": None if math.isnan(b.mean_predicted) else b.mean_predicted,
                }
                for b in self.bins
            ],
            "warnings": list(self.warnings),
        }


def residual_table(data: RegressionData, bins: int = 10) -> ResidualTable:
    """
    Bin residuals over [min y_pred, max y_pred] in equal-width bins

    Empty bins keep count 0 with NaN statistics and an EmptyResidualBin warning.
    Standard deviations are population (ddof=0) within each bin.
    """
    if bins < 2:
        raise ParameterOutOfRange(f"Residual table needs at least 2 bins, got {bins}")
    if len(data) < bins:
        raise TooFewSamples(f"Residual table with {bins} bins needs at least {bins} rows, got {len(data)}")

    predicted = data.y_pred
    residuals = data.residuals
    low, high = float(np.min(predicted)), float(np.max(predicted))
    if low == high:
        # every prediction identical; widen so the edges stay strictly increasing
        low, high = low - 0.5, high + 0.5
    edges = np.linspace(low, high, bins + 1)
    assignment = np.clip(np.searchsorted(edges, predicted, side="right") - 1, 0, bins - 1)

    table = []
    empty = False
    for index in range(bins):
        mask = assignment == index
        count = int(np.count_nonzero(mask))
        if count == 0:
            empty = True
            table.append(ResidualBin(float(edges[index]), float(edges[index + 1]), 0, math.nan, math.nan, math.nan))
            continue
        r = residuals[mask]
        table.append(ResidualBin(
            lower=float(edges[index]),
            upper=float(edges[index + 1]),
            count=count,
            mean_residual=float(np.mean(r)),
            std_residual=float(np.std(r)),
            mean_predicted=float(np.mean(predicted[mask])),
        ))
    warnings = (FlagCode.EMPTY_RESIDUAL_BIN.value,) if empty else ()
    return ResidualTable(tuple(float(e) for e in edges), tuple(table), warnings)


def residual_flags(
    table: ResidualTable,
    trend_fraction: float = DEFAULT_TREND_FRACTION,
    heteroscedastic_ratio: float = DEFAULT_HETEROSCEDASTIC_RATIO,
) -> List[DiagnosticFlag]:
    """
    Detect structure hidden behind a scalar fit score

    ResidualTrend: bin mean residuals move in one direction across at least trend_fraction
    of consecutive non-empty bin pairs. ResidualHeteroscedastic: the largest bin std exceeds
    the smallest (bins with at least 2 rows) by more than heteroscedastic_ratio.
    """
    usable = table.non_empty()
    if len(usable) < 2:
        raise NoUsableBins(f"Residual flags need at least 2 non-empty bins, got {len(usable)}")

    flags: List[DiagnosticFlag] = []
    means = np.array([b.mean_residual for b in usable])
    steps = np.diff(means)
    pairs = steps.size
    increasing = float(np.count_nonzero(steps > 0)) / pairs
    decreasing = float(np.count_nonzero(steps < 0)) / pairs
    if max(increasing, decreasing) >= trend_fraction:
        direction = "increasing" if increasing >= decreasing else "decreasing"
        flags.append(make_flag(
            FlagCode.RESIDUAL_TREND, Severity.WARN,
            f"Bin mean residuals are {direction} across {max(increasing, decreasing):.0%} of bin pairs",
            increasing_fraction=increasing,
            decreasing_fraction=decreasing,
            pairs=pairs,
            threshold=trend_fraction,
            first_mean_residual=means[0],
            last_mean_residual=means[-1],
        ))

    stds = np.array([b.std_residual for b in usable if b.count >= 2])
    if stds.size >= 2 and stds.max() > 0:
        smallest = float(stds.min())
        ratio = math.inf if smallest == 0.0 else float(stds.max()) / smallest
        if ratio > heteroscedastic_ratio:
            flags.append(make_flag(
                FlagCode.RESIDUAL_HETEROSCEDASTIC, Severity.WARN,
                f"Residual spread varies by a factor of {ratio:.3g} across predicted-value bins",
                max_std=float(stds.max()),
                min_std=smallest,
                ratio=ratio if math.isfinite(ratio) else None,
                threshold=heteroscedastic_ratio,
            ))
    return flags


def rmse_mae_ratio(data: RegressionData) -> Optional[float]:
    """RMSE / MAE, the outlier-penalty indicator; None when MAE is 0"""
    absolute = mae(data)
    if absolute == 0.0:
        return None
    return rmse(data) / absolute
