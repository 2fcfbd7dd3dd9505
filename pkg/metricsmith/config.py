"""
Configuration
Environment settings and the registered diagnostic thresholds
"""

import os
import logging
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0
SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Settings:
    """Process settings read from the environment (and a .env file if present)"""
    seed: int = DEFAULT_SEED
    seed_from_env: bool = False
    log_level: str = "INFO"
    event_log_path: Optional[str] = None
    workers: int = 1


def load_settings(env_file: Optional[str] = None) -> Settings:
    """
    Read METRICSMITH_* variables

    Args:
        env_file: Optional explicit .env path; the default lookup is used otherwise

    Returns:
        Settings instance
    """
    if env_file:
        load_dotenv(env_file)
    else:
        load_dotenv()

    raw_seed = os.getenv("METRICSMITH_SEED")
    seed = DEFAULT_SEED
    if raw_seed not in (None, ""):
        seed = parse_seed(raw_seed)

    raw_workers = os.getenv("METRICSMITH_WORKERS", "1")
    try:
        workers = int(raw_workers)
    except ValueError as e:
        raise ConfigError(f"METRICSMITH_WORKERS must be an integer, got {raw_workers!r}") from e
    if workers < 1:
        raise ConfigError(f"METRICSMITH_WORKERS must be >= 1, got {workers}")

    return Settings(
        seed=seed,
        seed_from_env=raw_seed not in (None, ""),
        log_level=os.getenv("METRICSMITH_LOG_LEVEL", "INFO").upper(),
        event_log_path=os.getenv("METRICSMITH_EVENT_LOG") or None,
        workers=workers,
    )


def parse_seed(value: Any) -> int:
    """Accept any integer that fits in 64 bits (negative values are rejected)"""
    try:
        seed = int(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Seed must be an integer, got {value!r}") from e
    if seed < 0 or seed > SEED_MASK:
        raise ConfigError(f"Seed must be in [0, 2^64), got {seed}")
    return seed


@dataclass(frozen=True)
class DiagnosticThresholds:
    """Registered cutoffs used by the diagnostics; all overridable from config"""
    lift: float = 0.05
    mcc_gate: float = 0.3
    minority_recall_gate: float = 0.5
    macro_micro_gap: float = 0.03
    near_zero_fraction: float = 0.05
    epsilon_scale: float = 0.01
    heteroscedastic_ratio: float = 3.0
    trend_fraction: float = 0.8
    severe_imbalance_ratio: float = 9.0
    calibration_min_bin_count: int = 10
    mape_epsilon: float = 1e-12

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "DiagnosticThresholds":
        """Return a copy with the given keys replaced"""
        if not overrides:
            return self
        known = {f.name: f.type for f in fields(self)}
        changes: Dict[str, Any] = {}
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"Unknown threshold '{key}' (known: {', '.join(sorted(known))})")
            try:
                number = float(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Threshold '{key}' must be numeric, got {value!r}") from e
            if number < 0:
                raise ConfigError(f"Threshold '{key}' must be non-negative, got {number}")
            changes[key] = int(number) if key == "calibration_min_bin_count" else number
        logger.debug(f"Threshold overrides applied: {changes}")
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_THRESHOLDS = DiagnosticThresholds()
