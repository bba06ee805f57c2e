"""
scheduler.py

Purpose:
    Defines the sweep Scheduler: it expands a SweepConfig into one RunTask per parameter point,
    dispatches the runnable ones to an executor and collects every outcome into a ReportTable.

Key Responsibilities:
    - Build the Cartesian product of the parameter axes with identical initial data at every
      point (the seed lives in the shared base config).
    - Skip combustion points outside lambda >= sqrt(mu + kappa), recording them with a note.
    - Run points locally or concurrently (threads/processes) up to the worker count.
    - Merge results through a single collector and fire sweep lifecycle events.
    - Keep every record, failures included, sorted by (eps, mu, kappa, lambda).
    - Provide table-level summaries: boundedness ratio, low-Mach slope and the exit code.

Usage:
    table = run_sweep(sweep, events=events)
    table.boundedness_ratio(), table.exit_code()
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.event import EventManager, SweepEvent
from core.exceptions import DiagnosticError
from core.executor import make_executor
from core.task import SKIPPED, RunTask, SweepRecord, TaskState
from dsl.config_dsl import SweepConfig, canonical_text

logger = logging.getLogger("lowmach.scheduler")

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ALL_FAILED = 2
EXIT_PARTIAL = 3


@dataclass
class ReportTable:
    records: list[SweepRecord] = field(default_factory=list)
    config_echo: str = ""
    schema_version: int = SCHEMA_VERSION

    def __len__(self) -> int:
        return len(self.records)

    def completed(self) -> list[SweepRecord]:
        return [r for r in self.records if r.termination == "completed" and r.report is not None]

    def boundedness_ratio(self) -> float:
        """
        For each (mu, kappa, lambda) group: max over the eps-axis of sup_t theorem_norm divided
        by its min. Returns the worst group; 1.0 when every norm is zero, nan with no data.
        """
        groups = defaultdict(list)
        for r in self.completed():
            groups[(r.params.mu, r.params.kappa, r.params.lam)].append(r.report.theorem_norm_sup)
        ratios = []
        for values in groups.values():
            hi, lo = max(values), min(values)
            if hi == 0.0:
                ratios.append(1.0)
            elif lo == 0.0:
                ratios.append(float("inf"))
            else:
                ratios.append(hi / lo)
        return max(ratios) if ratios else float("nan")

    def limit_slope(self, mu: float, kappa: float, lam: Optional[float] = None) -> float:
        """Least-squares slope of log ||div v_e|| against log eps for one (mu, kappa) slice."""
        rows = [r for r in self.completed()
                if r.params.mu == mu and r.params.kappa == kappa and (lam is None or r.params.lam == lam)
                and r.report.limit.div_ve_norm > 0]
        eps = np.array([r.params.eps for r in rows])
        div = np.array([r.report.limit.div_ve_norm for r in rows])
        if len(np.unique(eps)) < 2:
            raise DiagnosticError(f"limit slope needs >= 2 distinct eps values at mu={mu}, kappa={kappa}")
        slope, _ = np.polyfit(np.log(eps), np.log(div), 1)
        return float(slope)

    def curl_spread(self, mu: float, kappa: float) -> float:
        """max/min of ||curl(gamma v)|| across the eps-axis of one (mu, kappa) slice."""
        values = [r.report.limit.curl_gamma_v_norm for r in self.completed()
                  if r.params.mu == mu and r.params.kappa == kappa]
        if not values or min(values) == 0.0:
            return float("nan")
        return max(values) / min(values)

    def exit_code(self) -> int:
        ran = [r for r in self.records if r.termination != SKIPPED]
        failures = sum(r.failed for r in ran)
        if failures and failures == len(ran):
            return EXIT_ALL_FAILED
        if failures:
            return EXIT_PARTIAL
        return EXIT_OK

    def sort(self) -> None:
        self.records.sort(key=lambda r: r.params.key())


class Scheduler:
    def __init__(self, sweep: SweepConfig, executor_type: Optional[str] = None,
                 max_workers: Optional[int] = None, events: Optional[EventManager] = None):
        """
        Args:
            sweep (SweepConfig): validated sweep.
            executor_type (str): "local", "thread" or "process"; defaults to sweep.executor.
            max_workers (int): pool size; defaults to sweep.workers.
            events (EventManager): optional event manager for hooks.
        """
        self.sweep = sweep
        self.events = events
        self.executor_type = executor_type or sweep.executor
        self.max_workers = max_workers or sweep.workers
        if self.executor_type != "local" and self.max_workers == 1:
            self.executor_type = "local"
        self.tasks: list[RunTask] = []

    def _notify(self, event_type: str, **data):
        if self.events:
            self.events.notify(event_type, **data)

    def build_tasks(self) -> list[RunTask]:
        base = self.sweep.base
        self.tasks = [RunTask(point.label(), base.with_params(point)) for point in self.sweep.points()]
        if base.formulation == "combustion":
            for task in self.tasks:
                p = task.params
                if not p.combustion_admissible:
                    task.skip(f"combustion requires lambda >= sqrt(mu+kappa): lambda={p.lam:g} < nu={p.nu:.6g}")
        return self.tasks

    def _collect(self, task: RunTask) -> None:
        if task.state is TaskState.SUCCESS:
            self._notify(SweepEvent.POINT_SUCCEEDED, task=task)
        else:
            self._notify(SweepEvent.POINT_FAILED, task=task, exception=task.exception)

    def run(self) -> ReportTable:
        tasks = self.build_tasks()
        self._notify(SweepEvent.SWEEP_STARTED, sweep=self.sweep, n_points=len(tasks))

        skipped = [t for t in tasks if t.state is TaskState.SKIPPED]
        for task in skipped:
            self._notify(SweepEvent.POINT_SKIPPED, task=task)
        runnable = [t for t in tasks if t.state is TaskState.PENDING]

        executor = make_executor(self.executor_type, self.max_workers)
        try:
            if self.executor_type == "local":
                finished = []
                for task in runnable:
                    self._notify(SweepEvent.POINT_STARTED, task=task)
                    finished.append(executor.execute(task))
                    self._collect(finished[-1])
            else:
                for task in runnable:
                    self._notify(SweepEvent.POINT_STARTED, task=task)
                finished = executor.execute_many(runnable, on_done=self._collect)
        finally:
            executor.shutdown()

        table = ReportTable([t.record for t in finished + skipped], canonical_text(self.sweep))
        table.sort()
        self._notify(SweepEvent.SWEEP_COMPLETED, table=table)
        return table


def run_sweep(sweep: SweepConfig, events: Optional[EventManager] = None,
              executor_type: Optional[str] = None, max_workers: Optional[int] = None) -> ReportTable:
    return Scheduler(sweep, executor_type, max_workers, events).run()
