#!/usr/bin/env python3
"""
cli.py

Purpose:
    Command-line entry point for the low-Mach laboratory.
    Runs single simulations, parameter sweeps, gas-model checks, manufactured-solution studies
    and post-hoc norm evaluation of saved trajectories.

Key Responsibilities:
    - Parse global options (output directory, worker count, seed override, report format).
    - Load and validate configuration files, printing every config problem at once.
    - Wire logging and metrics listeners into the sweep event system.
    - Write reports and trajectories under the output directory.
    - Map outcomes to exit codes: 0 success, 1 config error, 2 runtime failure in all points,
      3 partial failure.

Usage:
    lowmach --out results sweep sweep.cfg
    lowmach --workers 4 --format json sweep sweep.cfg
    lowmach simulate run.cfg
    lowmach thermo-check gas.cfg
    lowmach mms primal-1d
    lowmach norms run.cfg results/trajectory.npz
"""

import os
import sys
from pathlib import Path

import click

# Add project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.diagnostics import build_norm_report
from core.event import EventManager, SweepEvent
from core.exceptions import ConfigError, LabError, PersistenceError
from core.mms import MMS_CASES, mms_convergence
from core.scheduler import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_OK, ReportTable, run_sweep
from core.task import SweepRecord, run_point
from core.thermo import coefficient_set, thermo_coefficients, validate_gas_model
from dsl.config_dsl import RunConfig, SweepConfig, canonical_text, load_config
from state.persistence import export_report, load_trajectory, save_json, save_trajectory
from utils.logging_utils import (
    enable_file_logging,
    log_point_failure,
    log_point_skipped,
    log_point_start,
    log_point_success,
    log_sweep_end,
    log_sweep_start,
    set_log_level,
)
from utils.metrics_utils import MetricsManager

MMS_ORDER_TOL = 0.2


def _load(path: str, ctx: click.Context):
    try:
        return load_config(path)
    except ConfigError as exc:
        click.echo(f"Config error in {path}:", err=True)
        for problem in exc.errors:
            click.echo(f"  - {problem}", err=True)
        ctx.exit(EXIT_CONFIG)


def _run_config(config, ctx: click.Context) -> RunConfig:
    if isinstance(config, SweepConfig):
        click.echo("Config declares sweep.* keys; use the 'sweep' command.", err=True)
        ctx.exit(EXIT_CONFIG)
    seed = ctx.obj["seed"]
    return config.with_seed(seed) if seed is not None else config


def _write_report(table: ReportTable, ctx: click.Context, stem: str = "report") -> None:
    for path in export_report(table, ctx.obj["out"], ctx.obj["format"], stem=stem):
        click.echo(f"Report written: {path}")


@click.group()
@click.option("--out", "out_dir", default="out", show_default=True, type=click.Path(file_okay=False),
              help="Directory for reports, trajectories and the log file.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker count for sweeps.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override init.seed.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True,
              help="Report format.")
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")
@click.option("--quiet", "-q", is_flag=True, help="Only log errors.")
@click.pass_context
def main(ctx, out_dir, workers, seed, fmt, verbose, quiet):
    """Low-Mach pseudo-spectral simulator and verification lab."""
    if verbose:
        set_log_level("DEBUG")
    elif quiet:
        set_log_level("ERROR")
    else:
        set_log_level("INFO")
    ctx.ensure_object(dict)
    ctx.obj.update({"out": Path(out_dir), "workers": workers, "seed": seed, "format": fmt})
    enable_file_logging(Path(out_dir) / "lowmach.log")


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def simulate(ctx, config_path):
    """Run one configuration and save its trajectory and norm report."""
    config = _run_config(_load(config_path, ctx), ctx)
    try:
        record, traj = run_point(config)
    except LabError as exc:
        click.echo(f"Run failed: {type(exc).__name__}: {exc}", err=True)
        ctx.exit(EXIT_ALL_FAILED)
    path = save_trajectory(traj, ctx.obj["out"] / "trajectory.npz", config_echo=canonical_text(config))
    click.echo(f"Trajectory written: {path}")
    table = ReportTable([record], canonical_text(config))
    _write_report(table, ctx)
    summary = f"termination={record.termination} T={record.realized_T:.6g}"
    if record.report is not None:
        summary += f" sup theorem_norm={record.report.theorem_norm_sup:.6g}"
    click.echo(summary)
    ctx.exit(table.exit_code())


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def sweep(ctx, config_path):
    """Run the Cartesian parameter sweep of a config and export the report table."""
    config = _load(config_path, ctx)
    if isinstance(config, RunConfig):
        p = config.params
        config = SweepConfig(config, (p.eps,), (p.mu,), (p.kappa,), (p.lam,))
    if ctx.obj["seed"] is not None:
        config = config.with_seed(ctx.obj["seed"])
    if ctx.obj["workers"] is not None:
        config = config.with_workers(ctx.obj["workers"])

    events = EventManager()
    events.register(SweepEvent.SWEEP_STARTED, log_sweep_start)
    events.register(SweepEvent.POINT_STARTED, log_point_start)
    events.register(SweepEvent.POINT_SUCCEEDED, log_point_success)
    events.register(SweepEvent.POINT_FAILED, log_point_failure)
    events.register(SweepEvent.POINT_SKIPPED, log_point_skipped)
    events.register(SweepEvent.SWEEP_COMPLETED, log_sweep_end)
    metrics = MetricsManager()
    metrics.attach(events)

    table = run_sweep(config, events=events)
    _write_report(table, ctx)
    for line in metrics.summary_lines():
        click.echo(line)
    click.echo(f"boundedness ratio: {table.boundedness_ratio():.6g}")
    ctx.exit(table.exit_code())


@main.command("thermo-check")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--samples", type=click.IntRange(min=4), default=8, show_default=True,
              help="Samples per axis of the state box.")
@click.pass_context
def thermo_check(ctx, config_path, samples):
    """Validate the configured gas model against the thermodynamic identities and sign conditions."""
    config = _load(config_path, ctx)
    base = config.base if isinstance(config, SweepConfig) else config
    try:
        model = base.build_gas()
        ref = thermo_coefficients(model, base.gas.P_ref, base.gas.T_ref)
        coeffs = coefficient_set(model, 0.0, 0.0)
        report = validate_gas_model(model, samples=samples)
    except LabError as exc:
        click.echo(f"Gas model check failed: {type(exc).__name__}: {exc}", err=True)
        ctx.exit(EXIT_ALL_FAILED)
    click.echo(f"reference: K_T={ref.K_T:.12g} K_P={ref.K_P:.12g} C_P={ref.C_P:.12g} "
               f"C_V={ref.C_V:.12g} Rcal={ref.Rcal:.12g}")
    click.echo(f"coefficients at Phi=0: g1={coeffs.g1:.12g} g2={coeffs.g2:.12g} g3={coeffs.g3:.12g} "
               f"chi1={coeffs.chi1:.12g} chi2={coeffs.chi2:.12g} chi3={coeffs.chi3:.12g}")
    click.echo(report.summary())
    ctx.exit(EXIT_OK if report.passed else EXIT_ALL_FAILED)


@main.command()
@click.argument("case", type=click.Choice(list(MMS_CASES)))
@click.pass_context
def mms(ctx, case):
    """Manufactured-solution convergence study (spatial error and temporal order)."""
    result = mms_convergence(case)
    for n, err in result.spatial_errors.items():
        click.echo(f"n={n:4d} spatial error={err:.3e}")
    for dt, err in result.temporal_errors.items():
        click.echo(f"dt={dt:<8g} error={err:.3e}")
    click.echo(f"temporal order: {result.temporal_order:.3f}")
    try:
        path = save_json(result.to_dict(), ctx.obj["out"] / f"mms_{case}.json")
    except PersistenceError as exc:
        click.echo(f"Could not write results: {exc}", err=True)
        ctx.exit(EXIT_ALL_FAILED)
    click.echo(f"Results written: {path}")
    ok = result.spatial_ok() and abs(result.temporal_order - 4.0) <= MMS_ORDER_TOL
    ctx.exit(EXIT_OK if ok else EXIT_ALL_FAILED)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("trajectory_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def norms(ctx, config_path, trajectory_path):
    """Recompute the norm report of a saved trajectory with the diagnostics of a config."""
    config = _run_config(_load(config_path, ctx), ctx)
    try:
        traj, _ = load_trajectory(trajectory_path)
        report = build_norm_report(traj, traj.params, config.build_gas(), config.transport, config.source,
                                   config.s, gamma_mode=config.gamma_mode, weighted_limit=config.weighted_limit)
    except LabError as exc:
        click.echo(f"Norm evaluation failed: {type(exc).__name__}: {exc}", err=True)
        ctx.exit(EXIT_ALL_FAILED)
    record = SweepRecord(traj.params, config.s, traj.termination.value, traj.realized_T, report,
                         note=traj.message)
    _write_report(ReportTable([record], canonical_text(config)), ctx, stem="norms")
    click.echo(f"x_norm={report.x_norm:.6g} hf={report.hf_norm:.6g} lf={report.lf_norm:.6g} "
               f"div_ve={report.limit.div_ve_norm:.6g}")


if __name__ == "__main__":
    main()
