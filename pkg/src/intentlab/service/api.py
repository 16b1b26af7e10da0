"""HTTP surface of the run-management service, versioned under /api/v1.

Thin adapters over the store, worker pool, and view builder: validation
errors map to 400, missing resources to 404, and method-family conflicts
(unsupported views, deletes of in-use datasets, views of unfinished runs)
to 409.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import APIRouter, FastAPI, HTTPException, Response
from pydantic import BaseModel

from ..discover import DISCOVER_METHODS, PLACEHOLDER_METHODS
from ..detect import DETECT_METHODS
from ..pipeline import CONFIG_SCHEMA, load_pipeline, predict_pipeline
from ..corpus import Utterance
from .store import ENV_WORKERS, ReferencedError, RunStore
from .views import VIEW_TAGS, ViewUnsupported, get_view
from .worker import WorkerPool


class DatasetIn(BaseModel):
    name: str
    path: str
    format: str = "tsv"


class PredictIn(BaseModel):
    utterances: list[dict]


def _summary(record) -> dict:
    return {"run_id": record.run_id, "state": record.state,
            "dataset": record.config.get("dataset"),
            "created_at": record.created_at, "finished_at": record.finished_at,
            "error": record.error}


def create_app(store: RunStore | None = None, pool: WorkerPool | None = None,
               console_dir=None) -> FastAPI:
    store = store or RunStore()
    store.recover()
    if pool is None:
        n = int(os.environ.get(ENV_WORKERS, "1"))
        pool = WorkerPool(store, n)
    pool.start()

    app = FastAPI(title="intentlab", version="1")
    api = APIRouter(prefix="/api/v1")

    @api.get("/config-schema")
    def config_schema():
        return {"fields": list(CONFIG_SCHEMA),
                "methods": {"detect": list(DETECT_METHODS),
                            "discover": list(DISCOVER_METHODS),
                            "registered_unimplemented": list(PLACEHOLDER_METHODS)},
                "views": list(VIEW_TAGS)}

    # -- datasets ---------------------------------------------------------
    @api.post("/datasets")
    def register_dataset(body: DatasetIn):
        try:
            return store.register_dataset(body.name, body.path, body.format)
        except (ValueError, OSError) as exc:
            raise HTTPException(400, str(exc)) from exc

    @api.get("/datasets")
    def list_datasets():
        return store.list_datasets()

    @api.get("/datasets/{name}/stats")
    def dataset_stats_endpoint(name: str):
        try:
            return store.dataset_statistics(name)
        except KeyError as exc:
            raise HTTPException(404, f"unknown dataset: {name}") from exc

    @api.delete("/datasets/{name}")
    def delete_dataset(name: str):
        try:
            store.delete_dataset(name)
        except KeyError as exc:
            raise HTTPException(404, f"unknown dataset: {name}") from exc
        except ReferencedError as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"deleted": name}

    # -- runs -------------------------------------------------------------
    @api.post("/runs")
    def submit_run(config: dict):
        try:
            run_id = store.submit_run(config)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        pool.submit(run_id)
        return {"run_id": run_id, "state": "queued"}

    @api.get("/runs")
    def list_runs(state: str | None = None):
        return [_summary(r) for r in store.list_runs(state)]

    @api.get("/runs/{run_id}")
    def get_run(run_id: str):
        try:
            return store.load_run(run_id).to_jsonable()
        except KeyError as exc:
            raise HTTPException(404, f"unknown run: {run_id}") from exc

    @api.post("/runs/{run_id}/cancel")
    def cancel_run(run_id: str):
        try:
            return _summary(store.cancel_run(run_id))
        except KeyError as exc:
            raise HTTPException(404, f"unknown run: {run_id}") from exc

    @api.get("/runs/{run_id}/report")
    def get_report(run_id: str):
        try:
            record = store.load_run(run_id)
        except KeyError as exc:
            raise HTTPException(404, f"unknown run: {run_id}") from exc
        if record.state != "finished":
            raise HTTPException(409, f"run {run_id} is {record.state}; no report yet")
        path = record.artifacts.get("report")
        if path is None:
            raise HTTPException(409, f"run {run_id} has no report artifact")
        # serve the artifact bytes untouched so every consumer sees the
        # exact canonical serialization
        with open(path, "rb") as fh:
            return Response(fh.read(), media_type="application/json")

    @api.get("/runs/{run_id}/views/{tag}")
    def get_run_view(run_id: str, tag: str):
        try:
            return get_view(store, run_id, tag)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc
        except ViewUnsupported as exc:
            raise HTTPException(409, str(exc)) from exc

    @api.post("/runs/{run_id}/predict")
    def predict(run_id: str, body: PredictIn):
        try:
            record = store.load_run(run_id)
        except KeyError as exc:
            raise HTTPException(404, f"unknown run: {run_id}") from exc
        if record.state != "finished":
            raise HTTPException(409, f"run {run_id} is {record.state}; cannot predict")
        path = record.artifacts.get("pipeline")
        if path is None:
            raise HTTPException(409, f"run {run_id} has no pipeline artifact")
        trained = load_pipeline(path)
        try:
            utts = [Utterance(u.get("id", f"q-{i}"), u["text"])
                    for i, u in enumerate(body.utterances)]
        except KeyError as exc:
            raise HTTPException(400, "each utterance needs a 'text' field") from exc
        try:
            preds = predict_pipeline(trained, utts)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        return {"predictions": [p.to_jsonable() for p in preds]}

    app.include_router(api)
    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles
        if not Path(console_dir).is_dir():
            raise ValueError(f"console directory does not exist: {console_dir}")
        app.mount("/", StaticFiles(directory=str(console_dir), html=True),
                  name="console")
    app.state.store = store
    app.state.pool = pool
    return app
