"""
Diagnostic Flags
Registered flag codes, severities and the flag record carried by reports
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional


class FlagCode(Enum):
    """Registered diagnostic and degeneracy codes"""
    ACCURACY_TRAP = "AccuracyTrap"
    SEVERE_IMBALANCE = "SevereImbalance"
    CALIBRATION_INVERSION = "CalibrationInversion"
    MAPE_UNSTABLE = "MapeUnstable"
    MACRO_MICRO_GAP = "MacroMicroGap"
    RESIDUAL_TREND = "ResidualTrend"
    RESIDUAL_HETEROSCEDASTIC = "ResidualHeteroscedastic"
    SPARSE_CLASS = "SparseClass"
    SINGLE_FOLD = "SingleFold"
    PRECISION_UNDEFINED = "PrecisionUndefined"
    RECALL_UNDEFINED = "RecallUndefined"
    MCC_UNDEFINED = "MccUndefined"
    FSCORE_UNDEFINED = "FScoreUndefined"
    ZERO_SUPPORT_CLASS = "ZeroSupportClass"
    RANKING_TIE = "RankingTie"
    CALIBRATION_BINS_MERGED = "CalibrationBinsMerged"
    MAPE_TARGETS_EXCLUDED = "MapeTargetsExcluded"
    EMPTY_RESIDUAL_BIN = "EmptyResidualBin"
    METRIC_INFEASIBLE = "MetricInfeasible"


REGISTERED_CODES = frozenset(code.value for code in FlagCode)


class Severity(Enum):
    INFO = "info"
    WARN = "warn"
    CRITICAL = "critical"


def _clean(value: Any) -> Optional[float]:
    # NaN has no JSON form; undefined evidence is serialized as null
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return None
    return value


@dataclass(frozen=True)
class DiagnosticFlag:
    """A raised diagnostic with the numbers that triggered it"""
    code: FlagCode
    severity: Severity
    message: str
    evidence: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "code": self.code.value,
            "severity": self.severity.value,
            "message": self.message,
            "evidence": {key: _clean(value) for key, value in self.evidence.items()},
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DiagnosticFlag":
        return cls(
            code=FlagCode(payload["code"]),
            severity=Severity(payload["severity"]),
            message=payload.get("message", ""),
            evidence=dict(payload.get("evidence", {})),
        )


def make_flag(code: FlagCode, severity: Severity, message: str, **evidence: Any) -> DiagnosticFlag:
    """Build a flag, converting evidence to plain floats"""
    return DiagnosticFlag(code, severity, message, {key: _clean(value) for key, value in evidence.items()})
