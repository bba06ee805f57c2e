"""
logging_utils.py

Purpose:
    Provides logging for simulations and sweeps: one "lowmach" logger whose children are used by
    every library module, plus listener functions for the sweep event system.

Key Responsibilities:
    - Configure the console handler with a uniform format.
    - Optionally add a file handler (the CLI writes one under its output directory).
    - Define log functions for sweep lifecycle events (start, point started/succeeded/failed/skipped, end).
    - Allow switching the verbosity of all handlers at once.

Usage:
    events.register(SweepEvent.POINT_FAILED, log_point_failure)
    set_log_level("DEBUG")
    enable_file_logging("out/lowmach.log")
"""
import logging
from pathlib import Path
from typing import Union

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# -------------------------
# Logger Configuration
# -------------------------
logger = logging.getLogger("lowmach")
logger.setLevel(logging.INFO)

if not any(getattr(h, "_lowmach_console", False) for h in logger.handlers):
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    console_handler._lowmach_console = True
    logger.addHandler(console_handler)


def enable_file_logging(path: Union[str, Path]) -> logging.FileHandler:
    """Adds a file handler at path (parent directories are created). Returns the handler."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == path.resolve():
            return handler
    file_handler = logging.FileHandler(path)
    file_handler.setLevel(logger.level)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
    logger.addHandler(file_handler)
    return file_handler


def disable_file_logging() -> None:
    for handler in list(logger.handlers):
        if isinstance(handler, logging.FileHandler):
            logger.removeHandler(handler)
            handler.close()


# -------------------------
# Sweep Event Logging
# -------------------------
def log_sweep_start(sweep=None, n_points=0, **kwargs):
    logger.info(f"Sweep STARTED: {n_points} point(s)")


def log_point_start(task, **kwargs):
    logger.info(f"Point STARTED: {task.name}")


def log_point_success(task, **kwargs):
    record = task.record
    msg = f"Point SUCCEEDED: {task.name} | termination={record.termination} | T={record.realized_T:.6g}"
    if record.report is not None:
        msg += f" | sup theorem_norm={record.report.theorem_norm_sup:.6g}"
    msg += f" | {record.wall_ms:.1f} ms"
    if record.termination == "blowup":
        logger.warning(msg + f" | {record.note}")
    else:
        logger.info(msg)


def log_point_failure(task, exception=None, **kwargs):
    exc_msg = exception or getattr(task, "exception", None)
    logger.error(f"Point FAILED: {task.name} | Exception: {exc_msg}")


def log_point_skipped(task, **kwargs):
    logger.warning(f"Point SKIPPED: {task.name} | {task.record.note}")


def log_sweep_end(table=None, **kwargs):
    if table is None:
        logger.info("Sweep COMPLETED.")
        return
    failures = sum(r.failed for r in table.records)
    logger.info(f"Sweep COMPLETED: {len(table)} record(s), {failures} failure(s)")


def set_log_level(level="INFO"):
    """
    Set the level of the lowmach logger and every handler attached to it.
    Usage: set_log_level("DEBUG"), set_log_level("WARNING"), etc.
    """
    logger.setLevel(level.upper())
    for handler in logger.handlers:
        handler.setLevel(level.upper())
