"""
persistence.py

Purpose:
    Saves and loads sweep reports and trajectories so runs can be inspected, compared and
    re-analysed later.

Key Responsibilities:
    - Export a ReportTable as CSV (fixed column set, shortest round-trip float formatting) or as
      JSON mirroring the record structure with a schema_version field.
    - Load a JSON report back into an identical ReportTable.
    - Save a Trajectory as a compressed .npz archive with embedded JSON metadata, and load it.
    - Write atomically (temp file then replace) and surface IO failures with the path.

Usage:
    paths = export_report(table, "out", fmt="csv")
    table = load_report_json("out/report.json")
    save_trajectory(traj, "out/traj.npz", config_echo=canonical_text(config))
    traj, meta = load_trajectory("out/traj.npz")
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np

from core.exceptions import PersistenceError
from core.model import FluidState, ParamPoint
from core.scheduler import SCHEMA_VERSION, ReportTable
from core.spectral import GridSpec
from core.task import SweepRecord
from core.timeloop import TerminationReason, Trajectory

PathLike = Union[str, Path]

CSV_COLUMNS = (
    "eps", "mu", "kappa", "lambda", "nu", "s", "realized_T", "termination",
    "theorem_norm_sup", "x_norm", "x1", "x2", "x3", "x4", "x5", "x6",
    "hf_norm", "lf_norm", "div_ve", "curl_gamma_v", "skew_residual", "balance_residual", "wall_ms",
)
REPORT_FORMATS = ("csv", "json")


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    """
    Atomically write bytes to a file path by writing to a temp file and replacing the target.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=path.name, dir=str(path.parent))
    except OSError as exc:
        raise PersistenceError(path, exc) from exc
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except OSError as exc:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise PersistenceError(path, exc) from exc


def _atomic_write_text(path: Path, data: str, encoding: str = "utf-8") -> None:
    _atomic_write_bytes(path, data.encode(encoding))


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def format_number(value: Any) -> str:
    """Shortest round-trip representation of a float; integers and strings unchanged."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# -------------------------
# Reports
# -------------------------
def record_row(record: SweepRecord) -> dict[str, Any]:
    p = record.params
    row: dict[str, Any] = dict.fromkeys(CSV_COLUMNS)
    row.update({
        "eps": p.eps, "mu": p.mu, "kappa": p.kappa, "lambda": p.lam, "nu": p.nu, "s": record.s,
        "realized_T": record.realized_T, "termination": record.termination, "wall_ms": record.wall_ms,
    })
    report = record.report
    if report is not None:
        row.update({
            "theorem_norm_sup": report.theorem_norm_sup,
            "x_norm": report.x_norm,
            "hf_norm": report.hf_norm,
            "lf_norm": report.lf_norm,
            "div_ve": report.limit.div_ve_norm,
            "curl_gamma_v": report.limit.curl_gamma_v_norm,
            "skew_residual": report.energy.skew_residual,
            "balance_residual": report.energy.balance_residual,
        })
        row.update(report.x_norm_components)
    return row


def report_csv(table: ReportTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in table.records:
        row = record_row(record)
        writer.writerow([format_number(row[col]) for col in CSV_COLUMNS])
    return buffer.getvalue()


def report_dict(table: ReportTable) -> dict:
    return {
        "schema_version": table.schema_version,
        "config": table.config_echo,
        "records": [record.to_dict() for record in table.records],
    }


def export_report(table: ReportTable, out_dir: PathLike, fmt: str = "csv", stem: str = "report") -> list[Path]:
    """Writes <out_dir>/<stem>.csv or .json; returns the written paths."""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"report format must be one of {REPORT_FORMATS} (got {fmt!r})")
    path = Path(out_dir) / f"{stem}.{fmt}"
    if fmt == "csv":
        _atomic_write_text(path, report_csv(table))
    else:
        _atomic_write_text(path, json.dumps(report_dict(table), indent=2))
    return [path]


def save_json(data: dict, path: PathLike) -> Path:
    """Atomic JSON write for small result documents such as the convergence study."""
    path = Path(path)
    _atomic_write_text(path, json.dumps(data, indent=2))
    return path


def load_report_json(path: PathLike) -> ReportTable:
    path = Path(path)
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise PersistenceError(path, exc) from exc
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise PersistenceError(path, ValueError(f"unsupported schema_version {version!r}"))
    return ReportTable(
        records=[SweepRecord.from_dict(r) for r in data["records"]],
        config_echo=data.get("config", ""),
        schema_version=version,
    )


# -------------------------
# Trajectories
# -------------------------
def save_trajectory(traj: Trajectory, path: PathLike, config_echo: str = "") -> Path:
    """Stores samples as a (n_samples, rows, *grid) array with JSON metadata in the same archive."""
    path = Path(path)
    grid = traj.states[0].grid
    meta = {
        "schema_version": SCHEMA_VERSION,
        "params": {"eps": traj.params.eps, "mu": traj.params.mu,
                   "kappa": traj.params.kappa, "lambda": traj.params.lam},
        "formulation": traj.formulation,
        "termination": traj.termination.value,
        "message": traj.message,
        "grid": {"dim": grid.dim, "n": grid.n_per_dim, "dealias": grid.dealias},
        "config": config_echo,
    }
    buffer = io.BytesIO()
    np.savez_compressed(
        buffer,
        times=np.asarray(traj.times),
        states=np.stack([st.pack() for st in traj.states]),
        dt_history=np.asarray(traj.dt_history),
        w1inf_history=np.asarray(traj.w1inf_history),
        meta=np.array(json.dumps(meta)),
    )
    _atomic_write_bytes(path, buffer.getvalue())
    return path


def load_trajectory(path: PathLike) -> tuple[Trajectory, dict]:
    """Returns the trajectory (without per-step accumulators) and its metadata."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["meta"]))
            times = archive["times"]
            states = archive["states"]
            dt_history = archive["dt_history"]
            w1inf_history = archive["w1inf_history"]
    except (OSError, KeyError, ValueError) as exc:
        raise PersistenceError(path, exc) from exc
    g = meta["grid"]
    grid = GridSpec(g["dim"], g["n"], g["dealias"])
    p = meta["params"]
    traj = Trajectory(
        params=ParamPoint(p["eps"], p["mu"], p["kappa"], p["lambda"]),
        formulation=meta["formulation"],
        times=[float(t) for t in times],
        states=[FluidState.unpack(grid, arr) for arr in states],
        dt_history=[float(x) for x in dt_history],
        w1inf_history=[float(x) for x in w1inf_history],
        termination=TerminationReason(meta["termination"]),
        message=meta["message"],
    )
    return traj, meta
