"""
executor.py

Purpose:
    Provides executor classes for running sweep points. Executors decide how RunTasks are
    executed: sequentially, on a thread pool or on a process pool.

Key Responsibilities:
    - Define a standard interface (BaseExecutor) with execute(task) and execute_many(tasks).
    - LocalExecutor: runs tasks in the calling process, one after another.
    - ThreadedExecutor: runs tasks concurrently on threads.
    - MultiprocessExecutor: runs tasks in worker processes; each worker owns its simulation
      end-to-end and sends the finished task back.
    - Return finished tasks in submission order and report each completion to an optional
      callback, which always runs in the calling thread.

Usage:
    executor = make_executor("process", max_workers=4)
    finished = executor.execute_many(tasks, on_done=collector)
    executor.shutdown()
"""
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Sequence

from core.exceptions import ConfigError
from core.task import RunTask

DoneCallback = Optional[Callable[[RunTask], None]]


def _run_task(task: RunTask) -> RunTask:
    task.run()
    return task


class BaseExecutor:
    """
    Base class for all executors. Subclasses must implement execute(task).
    """
    def execute(self, task: RunTask) -> RunTask:
        raise NotImplementedError("Executors must implement the execute(task) method.")

    def execute_many(self, tasks: Sequence[RunTask], on_done: DoneCallback = None) -> list[RunTask]:
        finished = []
        for task in tasks:
            done = self.execute(task)
            if on_done:
                on_done(done)
            finished.append(done)
        return finished

    def shutdown(self):
        pass


class LocalExecutor(BaseExecutor):
    """
    Executes tasks sequentially in the current process.
    """
    def execute(self, task: RunTask) -> RunTask:
        return _run_task(task)


class _PoolExecutor(BaseExecutor):
    def __init__(self, max_workers: int = 4):
        self.max_workers = max_workers
        self.pool: Executor = self._make_pool()

    def _make_pool(self) -> Executor:
        raise NotImplementedError

    def execute(self, task: RunTask) -> RunTask:
        return self.pool.submit(_run_task, task).result()

    def execute_many(self, tasks: Sequence[RunTask], on_done: DoneCallback = None) -> list[RunTask]:
        """
        Submits every task, fires on_done as results arrive and returns them in input order.
        """
        futures = [self.pool.submit(_run_task, task) for task in tasks]
        if on_done:
            for future in as_completed(futures):
                on_done(future.result())
        return [future.result() for future in futures]

    def shutdown(self):
        self.pool.shutdown()


class ThreadedExecutor(_PoolExecutor):
    """
    Executes multiple tasks in parallel using threading.
    """
    def _make_pool(self) -> Executor:
        return ThreadPoolExecutor(max_workers=self.max_workers)


class MultiprocessExecutor(_PoolExecutor):
    """
    Executes multiple tasks in parallel using processes. Tasks come back as copies.
    """
    def _make_pool(self) -> Executor:
        return ProcessPoolExecutor(max_workers=self.max_workers)


def make_executor(executor_type: str = "local", max_workers: int = 1) -> BaseExecutor:
    if executor_type == "thread":
        return ThreadedExecutor(max_workers=max_workers)
    if executor_type == "process":
        return MultiprocessExecutor(max_workers=max_workers)
    if executor_type == "local":
        return LocalExecutor()
    raise ConfigError([f"unknown executor type {executor_type!r}; choose local, thread or process"])
