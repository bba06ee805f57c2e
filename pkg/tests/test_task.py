"""
test_task.py

Purpose:
    Verifies the RunTask lifecycle and the SweepRecord it produces: successful runs, runs that
    end in blow-up, runs that raise, skipped points, resets and pickling for process pools.
"""

import pickle

from core.exceptions import ConfigError
from core.task import FAILED, SKIPPED, RunTask, SweepRecord, TaskState, run_point
from tests.helpers import quick_run


def test_task_creation():
    config = quick_run()
    t = RunTask("point", config)
    assert t.name == "point"
    assert t.state == TaskState.PENDING
    assert t.params == config.params
    assert t.record is None


def test_run_point_returns_record_and_trajectory():
    record, traj = run_point(quick_run())
    assert record.termination == "completed"
    assert record.realized_T == traj.realized_T
    assert record.report is not None
    assert record.report.x_norm > 0
    assert record.wall_ms > 0
    assert not record.failed


def test_task_run_success():
    t = RunTask("ok", quick_run(), keep_trajectory=True)
    assert t.run() is True
    assert t.state == TaskState.SUCCESS
    assert t.record.termination == "completed"
    assert t.trajectory is not None
    assert t.exception is None


def test_trajectory_dropped_by_default():
    t = RunTask("ok", quick_run())
    t.run()
    assert t.trajectory is None


def test_task_run_failure_is_recorded():
    # mode 9 is not resolved on n = 16, so building the initial data raises
    t = RunTask("bad", quick_run("init.generator = acoustic\ninit.mode = 9\n"))
    assert t.run() is False
    assert t.state == TaskState.FAILED
    assert isinstance(t.exception, ConfigError)
    assert t.record.termination == FAILED
    assert t.record.failed
    assert t.record.note.startswith("ConfigError:")
    assert t.record.report is None


def test_blowup_is_a_recorded_outcome():
    # eps p reaches 15, far outside the ideal-gas box
    t = RunTask("hot", quick_run("init.generator = acoustic\ninit.amplitude = 30\n"))
    assert t.run() is True
    assert t.state == TaskState.SUCCESS
    assert t.record.termination == "blowup"
    assert t.record.failed
    assert t.record.report is None
    assert "StateOutOfDomain" in t.record.note


def test_skipped_task_does_not_run():
    t = RunTask("skip", quick_run())
    t.skip("not admissible")
    assert t.run() is False
    assert t.state == TaskState.SKIPPED
    assert t.record.termination == SKIPPED
    assert not t.record.failed


def test_reset_returns_to_pending():
    t = RunTask("again", quick_run())
    t.run()
    t.reset()
    assert t.state == TaskState.PENDING
    assert t.record is None


def test_task_pickles_with_exception():
    t = RunTask("bad", quick_run("init.generator = acoustic\ninit.mode = 9\n"))
    t.run()
    copy = pickle.loads(pickle.dumps(t))
    assert copy.state == TaskState.FAILED
    assert isinstance(copy.exception, RuntimeError)
    assert "ConfigError" in str(copy.exception)
    assert copy.record.note == t.record.note
    assert copy.run() is False


def test_record_dict_roundtrip():
    record, _ = run_point(quick_run())
    again = SweepRecord.from_dict(record.to_dict())
    assert again.to_dict() == record.to_dict()
