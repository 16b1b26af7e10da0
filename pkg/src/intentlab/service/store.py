"""Durable run and dataset state under one data root.

Each run owns an append-only JSONL journal; a snapshot index file
accelerates listings and is rebuilt from the journals on recovery, so the
journals stay the source of truth. No database, everything diffable.

Layout:
    <root>/datasets.json
    <root>/index.json
    <root>/runs/<run_id>/journal.jsonl
    <root>/runs/<run_id>/cancel.flag
    <root>/runs/<run_id>/artifacts/
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from ..corpus import Dataset, dataset_stats, load_dataset
from ..pipeline import validate_config
from ..records import RunRecord, allowed_transition
from ..utils import atomic_write_text, canonical_json, new_ulid, utc_now_iso

ENV_DATA_ROOT = "INTENTLAB_DATA_ROOT"
ENV_ADDR = "INTENTLAB_ADDR"
ENV_WORKERS = "INTENTLAB_WORKERS"
ENV_CONSOLE_DIR = "INTENTLAB_CONSOLE_DIR"


def default_data_root() -> Path:
    return Path(os.environ.get(ENV_DATA_ROOT, "./intentlab-data"))


class RunStore:
    """Journal-backed persistence for runs plus the dataset registry."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_data_root()
        self.runs_dir = self.root / "runs"
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        if not self._datasets_path.exists():
            atomic_write_text(self._datasets_path, canonical_json({}))
        if not self._index_path.exists():
            atomic_write_text(self._index_path, canonical_json({}))

    # -- paths ------------------------------------------------------------
    @property
    def _datasets_path(self) -> Path:
        return self.root / "datasets.json"

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def run_dir(self, run_id: str) -> Path:
        return self.runs_dir / run_id

    def journal_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "journal.jsonl"

    def artifacts_dir(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "artifacts"

    def _cancel_flag(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "cancel.flag"

    # -- datasets ---------------------------------------------------------
    def _read_datasets(self) -> dict:
        with open(self._datasets_path, encoding="utf-8") as fh:
            return json.load(fh)

    def register_dataset(self, name: str, path, fmt: str = "tsv") -> dict:
        if not name or "/" in name:
            raise ValueError(f"bad dataset name: {name!r}")
        dataset = load_dataset(path, fmt, name=name)  # validates the files
        entry = {"path": str(Path(path).resolve()), "format": fmt,
                 "registered_at": utc_now_iso(),
                 "counts": {split: len(utts) for split, utts in dataset.splits.items()},
                 "n_labels": len(dataset.label_set)}
        with self._lock:
            table = self._read_datasets()
            table[name] = entry
            atomic_write_text(self._datasets_path, canonical_json(table))
        return {"name": name, **entry}

    def list_datasets(self) -> list[dict]:
        table = self._read_datasets()
        return [{"name": name, **entry} for name, entry in sorted(table.items())]

    def dataset_entry(self, name: str) -> dict:
        table = self._read_datasets()
        if name not in table:
            raise KeyError(f"unknown dataset: {name}")
        return table[name]

    def load_dataset(self, name: str) -> Dataset:
        entry = self.dataset_entry(name)
        return load_dataset(entry["path"], entry["format"], name=name)

    def dataset_statistics(self, name: str) -> dict:
        return dataset_stats(self.load_dataset(name))

    def delete_dataset(self, name: str) -> None:
        with self._lock:
            table = self._read_datasets()
            if name not in table:
                raise KeyError(f"unknown dataset: {name}")
            holders = [r.run_id for r in self.list_runs()
                       if not r.terminal and r.config.get("dataset") == name]
            if holders:
                raise ReferencedError(
                    f"dataset {name} is referenced by active runs: {', '.join(holders)}")
            del table[name]
            atomic_write_text(self._datasets_path, canonical_json(table))

    # -- journal primitives ----------------------------------------------
    def _append(self, run_id: str, entry: dict) -> None:
        entry = {"ts": utc_now_iso(), **entry}
        path = self.journal_path(run_id)
        with self._lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(canonical_json(entry) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def _update_index(self, run_id: str, record: RunRecord) -> None:
        with self._lock:
            with open(self._index_path, encoding="utf-8") as fh:
                index = json.load(fh)
            index[run_id] = {"state": record.state, "created_at": record.created_at,
                             "finished_at": record.finished_at, "error": record.error,
                             "dataset": record.config.get("dataset")}
            atomic_write_text(self._index_path, canonical_json(index))

    # -- run lifecycle ----------------------------------------------------
    def submit_run(self, config: dict) -> str:
        validate_config(config)  # raises with the offending field named
        if config.get("dataset") not in self._read_datasets():
            raise ValueError(f"unknown dataset: {config.get('dataset')!r}")
        run_id = new_ulid()
        run_dir = self.run_dir(run_id)
        run_dir.mkdir(parents=True)
        self.artifacts_dir(run_id).mkdir()
        self._append(run_id, {"type": "created", "config": config})
        self._append(run_id, {"type": "state", "state": "queued"})
        self._update_index(run_id, self.load_run(run_id))
        return run_id

    def load_run(self, run_id: str) -> RunRecord:
        """Rebuild the record by replaying its journal."""
        path = self.journal_path(run_id)
        if not path.exists():
            raise KeyError(f"unknown run: {run_id}")
        record = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                kind = entry["type"]
                if kind == "created":
                    record = RunRecord(run_id, entry["config"],
                                       created_at=entry["ts"])
                    record.state = "queued"
                elif kind == "state":
                    record.state = entry["state"]
                    if entry.get("error") is not None:
                        record.error = entry["error"]
                    if entry["state"] in ("finished", "failed"):
                        record.finished_at = entry["ts"]
                elif kind == "event":
                    record.events.append({"ts": entry["ts"], "step": entry["step"],
                                          "message": entry["message"]})
                elif kind == "artifact":
                    record.artifacts[entry["name"]] = entry["path"]
        if record is None:
            raise ValueError(f"run {run_id}: journal has no creation entry")
        return record

    def list_runs(self, state: str | None = None) -> list[RunRecord]:
        records = []
        for path in sorted(self.runs_dir.iterdir()):
            if not (path / "journal.jsonl").exists():
                continue
            record = self.load_run(path.name)
            if state is None or record.state == state:
                records.append(record)
        return records

    def append_state(self, run_id: str, state: str, error: str | None = None) -> None:
        entry = {"type": "state", "state": state}
        if error is not None:
            entry["error"] = error
        self._append(run_id, entry)
        self._update_index(run_id, self.load_run(run_id))

    def append_event(self, run_id: str, event: dict) -> None:
        self._append(run_id, {"type": "event", "step": event["step"],
                              "message": event["message"]})

    def append_artifact(self, run_id: str, name: str, path) -> None:
        self._append(run_id, {"type": "artifact", "name": name, "path": str(path)})

    def cancel_run(self, run_id: str) -> RunRecord:
        """Queued runs fail immediately; running runs are asked to stop at
        the next step boundary; terminal runs are left alone."""
        with self._lock:
            record = self.load_run(run_id)
            if record.state == "queued":
                self.append_state(run_id, "failed", error="cancelled")
                return self.load_run(run_id)
            if record.state == "running":
                self._cancel_flag(run_id).touch()
            return record

    def cancel_requested(self, run_id: str) -> bool:
        return self._cancel_flag(run_id).exists()

    # -- recovery and integrity -------------------------------------------
    def recover(self) -> list[str]:
        """Mark runs that were mid-flight when the process died as failed
        and rebuild the index snapshot. Returns the ids marked."""
        interrupted = []
        index = {}
        for path in sorted(self.runs_dir.iterdir()):
            if not (path / "journal.jsonl").exists():
                continue
            run_id = path.name
            record = self.load_run(run_id)
            if record.state == "running":
                self.append_state(run_id, "failed", error="interrupted")
                record = self.load_run(run_id)
                interrupted.append(run_id)
            index[run_id] = {"state": record.state, "created_at": record.created_at,
                             "finished_at": record.finished_at, "error": record.error,
                             "dataset": record.config.get("dataset")}
        with self._lock:
            atomic_write_text(self._index_path, canonical_json(index))
        return interrupted

    def integrity_check(self) -> list[str]:
        """Verify journals parse, state transitions are legal, and the index
        matches the journals; returns human-readable problems (empty = ok)."""
        problems = []
        states = {}
        for path in sorted(self.runs_dir.iterdir()):
            run_id = path.name
            journal = path / "journal.jsonl"
            if not journal.exists():
                problems.append(f"{run_id}: missing journal")
                continue
            prev = None
            created = False
            with open(journal, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        problems.append(f"{run_id}: unparseable journal line {lineno}")
                        continue
                    if entry["type"] == "created":
                        created = True
                    elif entry["type"] == "state":
                        new = entry["state"]
                        if prev is None:
                            if new != "queued":
                                problems.append(
                                    f"{run_id}: first state is {new}, expected queued")
                        elif not allowed_transition(prev, new):
                            problems.append(
                                f"{run_id}: illegal transition {prev} -> {new}")
                        prev = new
            if not created:
                problems.append(f"{run_id}: journal has no creation entry")
            states[run_id] = prev
        try:
            with open(self._index_path, encoding="utf-8") as fh:
                index = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            problems.append(f"index.json unreadable: {exc}")
            return problems
        for run_id, snap in index.items():
            if run_id not in states:
                problems.append(f"index lists unknown run: {run_id}")
            elif snap["state"] != states[run_id]:
                problems.append(
                    f"{run_id}: index state {snap['state']} != journal state {states[run_id]}")
        return problems


class ReferencedError(Exception):
    """A dataset cannot be deleted while nonterminal runs reference it."""
