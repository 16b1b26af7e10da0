"""Run management service: journaled store, worker pool, HTTP API."""

from .store import RunStore
from .worker import WorkerPool, execute_run

__all__ = ["RunStore", "WorkerPool", "execute_run"]
