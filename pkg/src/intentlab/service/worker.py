"""FIFO background execution of submitted runs.

A bounded pool of worker threads (default 1) pops run ids in submission
order and executes the training pipeline, journaling every step event
through the store. Cancellation is polled at step boundaries.
"""

from __future__ import annotations

import queue
import threading
import traceback

from ..analysis import MetricsReport
from ..pipeline import (PipelineCancelled, evaluate_pipeline, train_pipeline,
                        validate_config)
from ..records import RunRecord
from ..utils import atomic_write_text, canonical_json
from .store import RunStore


def execute_run(store: RunStore, run_id: str) -> None:
    """Train one run end to end and persist its artifacts."""
    journal_record = store.load_run(run_id)
    if journal_record.state != "queued":
        return
    store.append_state(run_id, "running")
    record = RunRecord(run_id, dict(journal_record.config), state="running")
    try:
        config = validate_config(journal_record.config)
        dataset = store.load_dataset(config.dataset)
        trained, record = train_pipeline(
            config, dataset, record=record,
            should_abort=lambda: store.cancel_requested(run_id),
            on_event=lambda e: store.append_event(run_id, e))

        art = store.artifacts_dir(run_id)
        art.mkdir(exist_ok=True)
        pipeline_path = art / "pipeline.json"
        trained.save(pipeline_path)
        store.append_artifact(run_id, "pipeline", pipeline_path)

        report = evaluate_pipeline(trained, dataset, "test")
        report_path = art / "report.json"
        atomic_write_text(report_path, report.to_json())
        store.append_artifact(run_id, "report", report_path)

        if trained.detector_eval is not None:
            eval_path = art / "detector_eval.json"
            atomic_write_text(eval_path, canonical_json(trained.detector_eval))
            store.append_artifact(run_id, "detector_eval", eval_path)

        store.append_state(run_id, "finished")
    except PipelineCancelled:
        store.append_state(run_id, "failed", error="cancelled")
    except Exception as exc:  # noqa: BLE001 - worker must survive any job error
        error = record.error if record.error else f"{type(exc).__name__}: {exc}"
        store.append_event(run_id, {"step": "worker",
                                    "message": traceback.format_exc(limit=3)})
        store.append_state(run_id, "failed", error=error)


def load_report(store: RunStore, run_id: str) -> MetricsReport:
    record = store.load_run(run_id)
    path = record.artifacts.get("report")
    if path is None:
        raise KeyError(f"run {run_id} has no report artifact")
    import json

    with open(path, encoding="utf-8") as fh:
        return MetricsReport.from_jsonable(json.load(fh))


class WorkerPool:
    """Threads draining a FIFO queue of run ids."""

    def __init__(self, store: RunStore, n_workers: int = 1, job_fn=execute_run):
        if n_workers < 1:
            raise ValueError(f"worker count must be >= 1: {n_workers}")
        self.store = store
        self.n_workers = n_workers
        self.job_fn = job_fn
        self._queue: queue.Queue = queue.Queue()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    def start(self) -> None:
        if self._threads:
            return
        # resume work that was queued when the previous process exited
        for record in self.store.list_runs("queued"):
            self._queue.put(record.run_id)
        for i in range(self.n_workers):
            t = threading.Thread(target=self._loop, name=f"intentlab-worker-{i}",
                                 daemon=True)
            t.start()
            self._threads.append(t)

    def submit(self, run_id: str) -> None:
        self._queue.put(run_id)

    def _loop(self) -> None:
        while not self._stopping.is_set():
            try:
                run_id = self._queue.get(timeout=0.2)
            except queue.Empty:
                continue
            if run_id is None:
                self._queue.task_done()
                break
            try:
                self.job_fn(self.store, run_id)
            except Exception:  # noqa: BLE001 - already journaled by the job
                pass
            finally:
                self._queue.task_done()

    def drain(self, timeout: float | None = None) -> None:
        """Block until every queued job has been picked up and finished."""
        if timeout is None:
            self._queue.join()
            return
        done = threading.Event()

        def waiter():
            self._queue.join()
            done.set()

        t = threading.Thread(target=waiter, daemon=True)
        t.start()
        if not done.wait(timeout):
            raise TimeoutError("worker queue did not drain in time")

    def stop(self) -> None:
        self._stopping.set()
        for _ in self._threads:
            self._queue.put(None)
        for t in self._threads:
            t.join(timeout=5)
        self._threads.clear()
