"""
Structured event logging
JSON event records for runs, metrics, flags and errors, mirrored to a JSON-lines sink when configured
"""

import json
import os
import sys
import time
import logging
import threading
from typing import Any, Dict, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "INFO") -> None:
    """Configure the root metricsmith logger on stderr"""
    root = logging.getLogger("metricsmith")
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)


class EventLogger:
    """Builds structured event records and writes them to the log and an optional sink"""

    def __init__(self, component: str = "metricsmith", sink_path: Optional[str] = None):
        self.component = component
        self.sink_path = sink_path
        self.logger = logging.getLogger("metricsmith.events")
        self._lock = threading.Lock()

    def _entry(self, log_type: str, level: str, message: str, **context: Any) -> Dict[str, Any]:
        entry = {
            "@timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "component": self.component,
            "log_type": log_type,
            "level": level,
            "message": message,
        }
        entry.update(context)
        return entry

    def _write_sink(self, entry: Dict[str, Any]) -> bool:
        """Append one JSON line to the sink file"""
        if not self.sink_path:
            return False
        try:
            with self._lock, open(self.sink_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, default=str) + "\n")
            return True
        except OSError as e:
            self.logger.warning(f"Failed to write event log {self.sink_path}: {e}")
            return False

    def log_run_start(self, command: str, seed: int, **context: Any) -> None:
        entry = self._entry("run", "info", f"{command} started (seed={seed})", command=command, seed=seed, **context)
        self._write_sink(entry)
        self.logger.info(entry["message"])

    def log_run_finish(self, command: str, exit_code: int, duration: float) -> None:
        entry = self._entry(
            "run", "info", f"{command} finished with exit code {exit_code} in {duration:.2f}s",
            command=command, exit_code=exit_code, duration=duration,
        )
        self._write_sink(entry)
        self.logger.info(entry["message"])

    def log_metric(self, model_id: str, metric: str, mean: float, folds: int) -> None:
        entry = self._entry(
            "metric", "info", f"{model_id}: {metric} mean={mean:.6g} over {folds} fold(s)",
            model_id=model_id, metric=metric, mean=mean, folds=folds,
        )
        self._write_sink(entry)
        self.logger.debug(entry["message"])

    def log_flag(self, model_id: str, flag: Any) -> None:
        payload = flag.to_dict()
        entry = self._entry(
            "flag", "warning" if payload["severity"] != "info" else "info",
            f"{model_id}: {payload['code']} ({payload['severity']}) {payload['message']}",
            model_id=model_id, flag=payload,
        )
        self._write_sink(entry)
        self.logger.info(entry["message"])

    def log_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
        entry = self._entry(
            "error", "error", f"{type(error).__name__}: {error}",
            error=str(error), error_type=type(error).__name__,
        )
        if context:
            entry.update(context)
        self._write_sink(entry)
        self.logger.error(entry["message"])


# Global event logger instance
_event_logger: Optional[EventLogger] = None


def get_event_logger() -> EventLogger:
    """Get or create the process-wide event logger"""
    global _event_logger
    if _event_logger is None:
        _event_logger = EventLogger(sink_path=os.getenv("METRICSMITH_EVENT_LOG") or None)
    return _event_logger


def reset_event_logger(sink_path: Optional[str] = None) -> EventLogger:
    """Replace the process-wide event logger (used when settings change the sink)"""
    global _event_logger
    _event_logger = EventLogger(sink_path=sink_path)
    return _event_logger
