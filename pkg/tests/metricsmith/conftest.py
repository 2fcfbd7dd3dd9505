"""
Shared fixtures for metricsmith tests
"""

import os
import sys

import pytest

# Add repository root to path to import metricsmith
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))

from metricsmith.event_log import reset_event_logger


@pytest.fixture(autouse=True)
def quiet_event_log(monkeypatch):
    """Keep tests independent of any METRICSMITH_* variables in the environment"""
    for name in ("METRICSMITH_SEED", "METRICSMITH_EVENT_LOG", "METRICSMITH_WORKERS", "METRICSMITH_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    reset_event_logger(None)
    yield
    reset_event_logger(None)


@pytest.fixture
def write_csv(tmp_path):
    """Write CSV text to a file under tmp_path and return its path"""
    def _write(text, name="predictions.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
