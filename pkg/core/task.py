"""
task.py

Purpose:
    Defines the RunTask abstraction: one parameter point of a sweep as a stateful unit of work,
    plus the SweepRecord it produces.

Key Responsibilities:
    - Run one configuration end-to-end: gas model, initial data, time loop, norm report.
    - Track the task lifecycle (PENDING -> RUNNING -> SUCCESS | FAILED, or SKIPPED).
    - Capture any failure on the task and turn it into a record instead of raising, so a sweep
      never aborts because one point went wrong.
    - Stay picklable so process pools can ship tasks to workers and back.

Usage:
    task = RunTask("eps=0.5", config)
    task.run()
    task.record.termination, task.record.report
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from core.diagnostics import NormReport, build_norm_report
from core.model import ParamPoint
from core.timeloop import Trajectory, make_initial_data, simulate

if TYPE_CHECKING:
    from dsl.config_dsl import RunConfig

logger = logging.getLogger("lowmach.task")

FAILED = "failed"
SKIPPED = "skipped"


class TaskState(Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    SUCCESS = "SUCCESS"
    FAILED = "FAILED"
    SKIPPED = "SKIPPED"


@dataclass
class SweepRecord:
    """Outcome of one parameter point. `report` is None for failed and skipped points."""
    params: ParamPoint
    s: int
    termination: str
    realized_T: float = 0.0
    report: Optional[NormReport] = None
    wall_ms: float = 0.0
    note: str = ""

    @property
    def failed(self) -> bool:
        return self.termination in (FAILED, "blowup")

    def to_dict(self) -> dict:
        return {
            "params": {"eps": self.params.eps, "mu": self.params.mu,
                       "kappa": self.params.kappa, "lambda": self.params.lam},
            "nu": self.params.nu,
            "s": self.s,
            "termination": self.termination,
            "realized_T": self.realized_T,
            "report": self.report.to_dict() if self.report is not None else None,
            "wall_ms": self.wall_ms,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepRecord":
        p = data["params"]
        report = data.get("report")
        return cls(
            params=ParamPoint(p["eps"], p["mu"], p["kappa"], p["lambda"]),
            s=int(data["s"]),
            termination=data["termination"],
            realized_T=data["realized_T"],
            report=NormReport.from_dict(report) if report is not None else None,
            wall_ms=data["wall_ms"],
            note=data.get("note", ""),
        )


def run_point(config: "RunConfig") -> tuple[SweepRecord, Trajectory]:
    """simulate + diagnostics for one configuration. Exceptions propagate to the caller."""
    start = time.perf_counter()
    model = config.build_gas()
    params = config.params
    initial = make_initial_data(config.init, config.grid, params, model, config.transport, config.source)
    traj = simulate(initial, params, model, config.transport, config.source, config.integrator,
                    formulation=config.formulation, closure=config.closure)
    report = None
    if len(traj.times) >= 2:
        report = build_norm_report(traj, params, model, config.transport, config.source, config.s,
                                   gamma_mode=config.gamma_mode, weighted_limit=config.weighted_limit)
    else:
        logger.warning("no norm report for %s: the run stopped before its first step", params.label())
    wall_ms = 1e3 * (time.perf_counter() - start)
    record = SweepRecord(params, config.s, traj.termination.value, traj.realized_T, report, wall_ms, traj.message)
    return record, traj


class RunTask:
    def __init__(self, name: str, config: "RunConfig", keep_trajectory: bool = False):
        self.name = name
        self.config = config
        self.keep_trajectory = keep_trajectory
        self.state = TaskState.PENDING
        self.record: Optional[SweepRecord] = None
        self.trajectory: Optional[Trajectory] = None
        self.exception: Optional[BaseException] = None
        self._lock = threading.Lock()

    @property
    def params(self) -> ParamPoint:
        return self.config.params

    def run(self) -> bool:
        """Execute the point; failures are recorded on the task and in its record."""
        with self._lock:
            if self.state is TaskState.SKIPPED:
                return False
            self.state = TaskState.RUNNING
            start = time.perf_counter()
            try:
                record, traj = run_point(self.config)
            except Exception as e:
                self.exception = e
                self.state = TaskState.FAILED
                self.record = SweepRecord(self.params, self.config.s, FAILED,
                                          wall_ms=1e3 * (time.perf_counter() - start),
                                          note=f"{type(e).__name__}: {e}")
                logger.error("Task %s failed: %s", self.name, e)
                return False
            self.record = record
            self.trajectory = traj if self.keep_trajectory else None
            self.exception = None
            self.state = TaskState.SUCCESS
            return True

    def skip(self, note: str) -> None:
        self.state = TaskState.SKIPPED
        self.record = SweepRecord(self.params, self.config.s, SKIPPED, note=note)

    def reset(self) -> None:
        self.state = TaskState.PENDING
        self.record = None
        self.trajectory = None
        self.exception = None

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        # exceptions with custom constructors do not survive unpickling
        exc = state["exception"]
        if exc is not None:
            state["exception"] = RuntimeError(f"{type(exc).__name__}: {exc}")
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()
