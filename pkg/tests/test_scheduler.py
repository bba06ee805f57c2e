"""
test_scheduler.py

Purpose:
    Tests the sweep Scheduler: one record per parameter point, skipped combustion points,
    lifecycle events, identical results across executors and the report-table summaries
    (boundedness ratio, low-Mach slope, exit codes).
"""

import math

import numpy as np
import pytest

from core.diagnostics import LimitDiagnostics, NormReport, build_norm_report
from core.event import EventManager, SweepEvent
from core.exceptions import DiagnosticError
from core.model import FluidState, ParamPoint, SourceSpec, TransportLaws
from core.scheduler import EXIT_ALL_FAILED, EXIT_OK, EXIT_PARTIAL, ReportTable, Scheduler, run_sweep
from core.spectral import GridSpec, ScalarField, VectorField
from core.task import SweepRecord
from core.thermo import coefficient_set, ideal_gas
from core.timeloop import IntegratorConfig, simulate
from dsl.config_dsl import parse_config
from tests.helpers import quick_sweep


def _record(eps, mu=0.0, kappa=0.0, sup=1.0, div_ve=1.0, termination="completed"):
    params = ParamPoint(eps, mu, kappa)
    report = NormReport(2, params, theorem_norm_sup=sup, limit=LimitDiagnostics(div_ve, 0.5))
    return SweepRecord(params, 2, termination, 0.1, report if termination == "completed" else None)


def test_sweep_produces_sorted_records():
    table = run_sweep(quick_sweep("sweep.kappa = 0.1, 0.2\n"))
    assert len(table) == 4
    assert [r.params.key() for r in table.records] == sorted(r.params.key() for r in table.records)
    assert all(r.termination == "completed" for r in table.records)
    assert table.exit_code() == EXIT_OK
    assert "sweep.eps = 1.0, 0.5" in table.config_echo
    assert table.boundedness_ratio() >= 1.0


def test_sweep_events_fire_in_order():
    events = EventManager()
    seen = []
    for name in (SweepEvent.SWEEP_STARTED, SweepEvent.POINT_STARTED, SweepEvent.POINT_SUCCEEDED,
                 SweepEvent.SWEEP_COMPLETED):
        events.register(name, lambda _name=name, **kw: seen.append(_name))
    run_sweep(quick_sweep(), events=events)
    assert seen[0] == SweepEvent.SWEEP_STARTED
    assert seen[-1] == SweepEvent.SWEEP_COMPLETED
    assert seen.count(SweepEvent.POINT_SUCCEEDED) == 2


def test_inadmissible_combustion_points_are_skipped():
    sweep = quick_sweep("run.formulation = combustion\ninit.species = 1\nsweep.lambda = 0, 1\n")
    skipped = []
    events = EventManager()
    events.register(SweepEvent.POINT_SKIPPED, lambda task, **kw: skipped.append(task.name))
    table = run_sweep(sweep, events=events)
    assert len(table) == 4
    terminations = {r.params.key(): r.termination for r in table.records}
    assert terminations[(0.5, 0.1, 0.1, 0.0)] == "skipped"
    assert terminations[(0.5, 0.1, 0.1, 1.0)] == "completed"
    assert len(skipped) == 2
    assert table.exit_code() == EXIT_OK


def test_failed_points_do_not_abort_the_sweep():
    table = run_sweep(quick_sweep("init.generator = acoustic\ninit.mode = 9\n"))
    assert len(table) == 2
    assert all(r.termination == "failed" for r in table.records)
    assert table.exit_code() == EXIT_ALL_FAILED


def test_threaded_sweep_matches_local_sweep():
    sweep = quick_sweep()
    local = run_sweep(sweep)
    threaded = run_sweep(sweep, executor_type="thread", max_workers=2)
    assert [r.report.to_dict() for r in local.records] == [r.report.to_dict() for r in threaded.records]


def test_single_worker_forces_local_execution():
    assert Scheduler(quick_sweep(), executor_type="process", max_workers=1).executor_type == "local"


def test_boundedness_ratio():
    table = ReportTable([_record(1.0, sup=2.0), _record(0.5, sup=4.0), _record(0.5, mu=0.1, sup=1.0)])
    assert table.boundedness_ratio() == 2.0
    assert math.isnan(ReportTable().boundedness_ratio())
    assert ReportTable([_record(1.0, sup=0.0), _record(0.5, sup=0.0)]).boundedness_ratio() == 1.0
    assert ReportTable([_record(1.0, sup=0.0), _record(0.5, sup=1.0)]).boundedness_ratio() == math.inf


def test_limit_slope():
    table = ReportTable([_record(eps, div_ve=3.0 * eps) for eps in (1.0, 0.5, 0.25)])
    assert table.limit_slope(0.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(DiagnosticError):
        ReportTable([_record(1.0)]).limit_slope(0.0, 0.0)


def test_exit_codes():
    assert ReportTable([_record(1.0), _record(0.5, termination="blowup")]).exit_code() == EXIT_PARTIAL
    assert ReportTable([_record(1.0, termination="failed")]).exit_code() == EXIT_ALL_FAILED
    assert ReportTable([_record(1.0), _record(0.5, termination="skipped")]).exit_code() == EXIT_OK


def test_skipped_runs_do_not_mask_total_failure():
    """Purpose: when every run that executed failed, skipped points must not downgrade the exit code to partial."""
    table = ReportTable([_record(1.0, termination="blowup"), _record(0.5, termination="skipped")])
    assert table.exit_code() == EXIT_ALL_FAILED
    mixed = ReportTable([_record(1.0, termination="failed"), _record(0.5), _record(0.25, termination="skipped")])
    assert mixed.exit_code() == EXIT_PARTIAL
    assert ReportTable([_record(1.0, termination="skipped")]).exit_code() == EXIT_OK


WELL_PREPARED_SWEEP = """
grid.dim = 1
grid.n = 16
init.generator = well-prepared
init.amplitude = 0.05
integrator.t_end = 0.1
integrator.dt = 0.005
sweep.eps = 0.5, 0.25, 0.125
sweep.mu = 0, 1
sweep.kappa = 0, 1
"""


def test_well_prepared_sweep_stays_bounded_across_eps():
    """Purpose: a reduced well-prepared sweep completes everywhere and its theorem norm varies by at most 3x along eps."""
    table = run_sweep(parse_config(WELL_PREPARED_SWEEP))
    assert len(table) == 12
    assert all(r.termination == "completed" for r in table.records)
    assert table.exit_code() == EXIT_OK
    assert 1.0 <= table.boundedness_ratio() <= 3.0


def test_corrected_divergence_vanishes_linearly_in_eps():
    """Purpose: for a heat mode with matched drift velocity, ||div v_e|| at a quarter acoustic period fits a log-log slope near 1 in eps."""
    gas = ideal_gas(R=1.0, C_V=1.5)
    transport = TransportLaws.constant(k=1.0)
    grid = GridSpec(1, 16)
    (x,) = grid.coordinates()
    amplitude, kappa = 1e-4, 1.0
    C0 = coefficient_set(gas, 0.0, 0.0)
    c0 = 1.0 / math.sqrt(C0.g1 * C0.g2)
    records = []
    for eps in (1 / 8, 1 / 16, 1 / 32, 1 / 64):
        params = ParamPoint(eps, 0.0, kappa)
        theta = ScalarField(grid, amplitude * np.sin(x))
        drift = VectorField((ScalarField(grid, kappa * C0.chi1 * amplitude * np.cos(x)),))
        state = FluidState(ScalarField.zeros(grid), drift, theta)
        t_end = 0.5 * math.pi * eps / c0
        traj = simulate(state, params, gas, transport, SourceSpec.none(),
                        IntegratorConfig(t_end=t_end, fixed_dt=t_end / 100))
        report = build_norm_report(traj, params, gas, transport, SourceSpec.none(), 2)
        records.append(SweepRecord(params, 2, traj.termination.value, traj.realized_T, report))
    table = ReportTable(records)
    assert all(r.termination == "completed" for r in records)
    assert table.limit_slope(0.0, kappa) >= 0.8
