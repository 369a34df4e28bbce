#!/usr/bin/env python3
"""
Monitoring - Prometheus metrics and structured logging
"""

import json
import logging
import uuid
from pathlib import Path
from typing import Optional

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, generate_latest

from reduction_engine.checks import CheckReport

# Prometheus metrics
RHS_EVALUATIONS = Counter(
    "lp_rhs_evaluations_total", "Right-hand side evaluations", ["system"]
)
INTEGRATION_STEPS = Counter(
    "lp_integration_steps_total", "Accepted integrator steps", ["method"]
)
INTEGRATION_DURATION = Histogram(
    "lp_integration_duration_seconds", "Wall time per integration", ["method"]
)
CHECK_MAX_RESIDUAL = Gauge(
    "lp_check_max_residual", "Worst residual per identity", ["identity"]
)
CHECK_FAILURES = Counter("lp_check_failures_total", "Identities above tolerance")

PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class JsonFormatter(logging.Formatter):
    """One JSON object per record; StructuredLogger payloads are merged in."""

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage()
        log_data = {
            "timestamp": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
        }
        try:
            payload = json.loads(message)
        except ValueError:
            payload = None
        if isinstance(payload, dict):
            log_data.update(payload)
        else:
            log_data["message"] = message
        return json.dumps(log_data, default=str, sort_keys=True)


class StructuredLogger:
    """Structured logging with a per-run correlation ID"""

    def __init__(self, name: str, run_id: Optional[str] = None):
        self.logger = logging.getLogger(name)
        self.run_id = run_id or str(uuid.uuid4())

    def info(self, message, **kwargs):
        self._log("info", message, **kwargs)

    def warning(self, message, **kwargs):
        self._log("warning", message, **kwargs)

    def error(self, message, **kwargs):
        self._log("error", message, **kwargs)

    def _log(self, level, message, **kwargs):
        log_data = {"message": message, "run_id": self.run_id, **kwargs}
        getattr(self.logger, level)(json.dumps(log_data, default=str, sort_keys=True))


def setup_logging(level: str = "INFO", fmt: str = "text") -> None:
    """Configure the root logger with the plain or JSON line format."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(level=numeric, format=PLAIN_FORMAT)
    root = logging.getLogger()
    root.setLevel(numeric)
    if fmt == "json":
        for handler in root.handlers:
            if isinstance(handler, logging.StreamHandler):
                handler.setFormatter(JsonFormatter())


def record_report(report: CheckReport) -> None:
    for entry in report.entries:
        CHECK_MAX_RESIDUAL.labels(identity=entry.name).set(entry.max_residual)
        if not entry.passed:
            CHECK_FAILURES.inc()


def export_metrics(path: str) -> None:
    """Write the Prometheus exposition text to ``path``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(generate_latest(REGISTRY))
    logging.getLogger(__name__).info(f"Metrics written to {target}")
