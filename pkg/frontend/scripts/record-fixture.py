"""Record live API payloads into the fixture the console tests replay.

Runs the backend in-process, executes one full pipeline run and one
detection-only run on the generated demo corpus, then snapshots every
endpoint the console touches. Keys are "METHOD path"; the _meta entry
carries the run ids and the predict request body so tests can rebuild
the exact paths.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from intentlab.service.api import create_app
from intentlab.service.store import RunStore
from intentlab.service.worker import WorkerPool

REPO = Path(__file__).resolve().parents[2]
OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "api.json"

RUN_CONFIG = {
    "dataset": "assistant", "kir": 0.5, "lr": 0.5, "seed": 4,
    "detect": "adb", "discover": "semi_seeded",
    "hidden": 32, "repr_dim": 12, "epochs": 80, "learning_rate": 0.3,
    "max_features": 400, "adb_epochs": 150,
}

PREDICT_BODY = {"utterances": [
    {"id": "q1", "text": "wire twenty dollars to my landlord"},
    {"id": "q2", "text": "do i need an umbrella in chicago today"},
    {"id": "q3", "text": "what is the balance of my savings account"},
]}


def main():
    tmp = Path(tempfile.mkdtemp(prefix="intentlab-fixture-"))
    corpus = tmp / "assistant"
    subprocess.run([sys.executable, str(REPO / "demos" / "make_dataset.py"),
                    str(corpus)], check=True, stdout=subprocess.DEVNULL)

    store = RunStore(tmp / "data")
    pool = WorkerPool(store, 1)
    client = TestClient(create_app(store, pool))

    resp = client.post("/api/v1/datasets", json={
        "name": "assistant", "path": str(corpus), "format": "tsv"})
    assert resp.status_code == 200, resp.text
    run_id = client.post("/api/v1/runs", json=RUN_CONFIG).json()["run_id"]
    detect_id = client.post("/api/v1/runs", json={
        **RUN_CONFIG, "task": "detect", "kir": 0.75}).json()["run_id"]
    pool.drain(180)

    fixtures = {"_meta": {"run_id": run_id, "detect_run_id": detect_id,
                          "predict_body": PREDICT_BODY}}

    def rec(method, path, body=None, status=200):
        resp = client.post(path, json=body) if method == "POST" \
            else client.get(path)
        assert resp.status_code == status, (path, resp.status_code, resp.text)
        fixtures[f"{method} {path}"] = {"status": status, "body": resp.json()}

    rec("GET", "/api/v1/config-schema")
    rec("GET", "/api/v1/datasets")
    rec("GET", "/api/v1/datasets/assistant/stats")
    rec("GET", "/api/v1/runs")
    for rid in (run_id, detect_id):
        rec("GET", f"/api/v1/runs/{rid}")
    rec("GET", f"/api/v1/runs/{run_id}/report")
    for tag in ("confidence_histogram", "representation_2d", "center_2d",
                "confusion", "sweep_curve", "keywords"):
        rec("GET", f"/api/v1/runs/{run_id}/views/{tag}")
    # the console's empty-state path: a view this run family cannot produce
    rec("GET", f"/api/v1/runs/{detect_id}/views/keywords", status=409)
    rec("POST", f"/api/v1/runs/{run_id}/predict", body=PREDICT_BODY)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"recorded {len(fixtures) - 1} endpoints to {OUT}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
