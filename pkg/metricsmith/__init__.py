"""
metricsmith
Evaluation metrics, validation protocols and misuse diagnostics for classifiers and regressors
"""

__version__ = "0.1.0"

__all__ = [
    "classify",
    "config",
    "core",
    "diagnose",
    "errors",
    "flags",
    "rank",
    "regimes",
    "regress",
    "scenarios",
    "suite",
    "validate",
]
