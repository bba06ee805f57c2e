"""
metrics_utils.py

Purpose:
    Collects and reports runtime metrics of a sweep: per-point status and wall time, outcome
    counters and the total sweep duration.

Key Responsibilities:
    - Record status, wall time (as measured by the worker) and termination of every point.
    - Maintain counters for succeeded, failed, blown-up and skipped points.
    - Act as an EventManager listener (attach() registers every handler).
    - Produce a short text summary for the CLI.

Usage:
    metrics = MetricsManager()
    metrics.attach(events)
    ... run_sweep(...)
    print("\n".join(metrics.summary_lines()))
"""

import time
from collections import defaultdict

from core.event import SweepEvent


class MetricsManager:
    """
    Collects metrics for sweep points and the sweep as a whole.
    """

    def __init__(self):
        self.point_metrics = defaultdict(
            lambda: {
                "start_time": None,
                "wall_ms": None,
                "status": None,
                "termination": None,
            }
        )
        self.sweep_metrics = {
            "points_total": 0,
            "points_success": 0,
            "points_failed": 0,
            "points_blowup": 0,
            "points_skipped": 0,
            "sweep_start_time": None,
            "sweep_duration": None,
        }

    def attach(self, events) -> None:
        events.register(SweepEvent.SWEEP_STARTED, self.sweep_started)
        events.register(SweepEvent.POINT_STARTED, self.point_started)
        events.register(SweepEvent.POINT_SUCCEEDED, self.point_succeeded)
        events.register(SweepEvent.POINT_FAILED, self.point_failed)
        events.register(SweepEvent.POINT_SKIPPED, self.point_skipped)
        events.register(SweepEvent.SWEEP_COMPLETED, self.sweep_completed)

    # -------------------------
    # Point Event Handlers
    # -------------------------
    def point_started(self, task, **kwargs):
        self.point_metrics[task.name]["start_time"] = time.time()
        self.point_metrics[task.name]["status"] = "RUNNING"

    def _finish(self, task, status):
        record = task.record
        self.point_metrics[task.name].update(
            {
                "wall_ms": record.wall_ms if record is not None else None,
                "status": status,
                "termination": record.termination if record is not None else None,
            }
        )

    def point_succeeded(self, task, **kwargs):
        self._finish(task, "SUCCESS")
        self.sweep_metrics["points_success"] += 1
        if task.record.termination == "blowup":
            self.sweep_metrics["points_blowup"] += 1

    def point_failed(self, task, exception=None, **kwargs):
        self._finish(task, "FAILED")
        self.sweep_metrics["points_failed"] += 1

    def point_skipped(self, task, **kwargs):
        self._finish(task, "SKIPPED")
        self.sweep_metrics["points_skipped"] += 1

    # -------------------------
    # Sweep Event Handlers
    # -------------------------
    def sweep_started(self, n_points=0, **kwargs):
        self.sweep_metrics["points_total"] = n_points
        self.sweep_metrics["sweep_start_time"] = time.time()

    def sweep_completed(self, **kwargs):
        start = self.sweep_metrics.get("sweep_start_time") or time.time()
        self.sweep_metrics["sweep_duration"] = time.time() - start

    # -------------------------
    # Reporting
    # -------------------------
    def total_wall_ms(self) -> float:
        return sum(m["wall_ms"] or 0.0 for m in self.point_metrics.values())

    def summary_lines(self) -> list[str]:
        m = self.sweep_metrics
        duration = m["sweep_duration"]
        duration_str = f"{duration:.3f}s" if duration is not None else "N/A"
        lines = ["=== Sweep Metrics ==="]
        for name, metrics in self.point_metrics.items():
            wall = metrics["wall_ms"]
            wall_str = f"{wall:.1f}ms" if wall is not None else "N/A"
            lines.append(f"{name}: Status={metrics['status']}, Termination={metrics['termination']}, Wall={wall_str}")
        lines.append(f"Sweep Duration: {duration_str}")
        lines.append(
            f"Points: total={m['points_total']} success={m['points_success']} failed={m['points_failed']} "
            f"blowup={m['points_blowup']} skipped={m['points_skipped']}"
        )
        return lines
