"""
Stage timing metrics for pipeline runs and CLI commands.
"""
from typing import Dict, Any, Iterator
from datetime import datetime, timezone
from contextlib import contextmanager
from collections import defaultdict
import threading
import time


class MetricsCollector:
    """Collect and track per-stage durations and failures."""

    def __init__(self):
        """Initialize metrics collector."""
        self._lock = threading.Lock()
        self._stage_counts = defaultdict(int)
        self._stage_durations = defaultdict(list)
        self._error_counts = defaultdict(int)
        self._start_time = datetime.now(timezone.utc)

    def record_stage(self, stage: str, duration: float, failed: bool = False):
        """
        Record one stage execution.

        Args:
            stage: Dotted stage name (e.g. "encode.vit", "command.grid")
            duration: Duration in seconds
            failed: Whether the stage raised
        """
        with self._lock:
            self._stage_counts[stage] += 1
            self._stage_durations[stage].append(duration)

            if failed:
                self._error_counts[stage] += 1

    @contextmanager
    def timed(self, stage: str) -> Iterator[None]:
        """Time the enclosed block and record it under ``stage``."""
        start_time = time.perf_counter()
        failed = False
        try:
            yield
        except Exception:
            failed = True
            raise
        finally:
            self.record_stage(stage, time.perf_counter() - start_time, failed=failed)

    def get_metrics(self) -> Dict[str, Any]:
        """
        Get current metrics summary.

        Returns:
            Dict containing metrics data
        """
        with self._lock:
            metrics = {
                "uptime_seconds": (datetime.now(timezone.utc) - self._start_time).total_seconds(),
                "total_runs": sum(self._stage_counts.values()),
                "total_errors": sum(self._error_counts.values()),
                "stages": {}
            }

            for stage in sorted(self._stage_counts):
                durations = self._stage_durations[stage]

                if durations:
                    avg_duration = sum(durations) / len(durations)
                    max_duration = max(durations)
                    min_duration = min(durations)
                else:
                    avg_duration = max_duration = min_duration = 0

                metrics["stages"][stage] = {
                    "count": self._stage_counts[stage],
                    "error_count": self._error_counts[stage],
                    "avg_duration_ms": round(avg_duration * 1000, 2),
                    "max_duration_ms": round(max_duration * 1000, 2),
                    "min_duration_ms": round(min_duration * 1000, 2)
                }

            return metrics

    def reset_metrics(self):
        """Reset all metrics."""
        with self._lock:
            self._stage_counts.clear()
            self._stage_durations.clear()
            self._error_counts.clear()
            self._start_time = datetime.now(timezone.utc)


# Global metrics collector instance
metrics_collector = MetricsCollector()
