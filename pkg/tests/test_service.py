import json
import time

import pytest
from fastapi.testclient import TestClient

from intentlab.analysis import MetricsReport
from intentlab.pipeline import CONFIG_SCHEMA
from intentlab.service.api import create_app
from intentlab.service.store import ReferencedError, RunStore
from intentlab.service.worker import WorkerPool, execute_run, load_report
from intentlab.service.views import VIEW_TAGS

from conftest import build_text_dataset

SMALL = {"dataset": "toy", "kir": 0.5, "lr": 1.0, "seed": 0,
         "hidden": 16, "repr_dim": 8, "epochs": 60, "learning_rate": 0.3,
         "batch_size": 16, "max_features": 300, "adb_epochs": 100,
         "detect": "adb", "discover": "kmeans"}

PIPELINE_STEPS = ["sampling", "featurize", "train_detector", "detector_eval",
                  "assemble_discovery", "train_discovery", "keywords"]


def _journal_lines(store, run_id):
    with open(store.journal_path(run_id), encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture
def store(tmp_path):
    return RunStore(tmp_path / "data")


@pytest.fixture
def store_with_toy(tmp_path):
    s = RunStore(tmp_path / "data")
    s.register_dataset("toy", build_text_dataset(tmp_path / "toy"), "tsv")
    return s


# -- store: datasets -------------------------------------------------------

def test_store_creates_layout(tmp_path):
    s = RunStore(tmp_path / "data")
    assert (s.root / "datasets.json").exists()
    assert (s.root / "index.json").exists()
    assert s.runs_dir.is_dir()


def test_register_and_inspect_dataset(store_with_toy):
    entries = store_with_toy.list_datasets()
    assert [e["name"] for e in entries] == ["toy"]
    entry = store_with_toy.dataset_entry("toy")
    assert entry["format"] == "tsv"
    assert entry["counts"] == {"train": 40, "eval": 16, "test": 16}
    assert entry["n_labels"] == 4
    stats = store_with_toy.dataset_statistics("toy")
    assert stats["name"] == "toy" and stats["n_labels"] == 4
    assert stats["splits"]["train"]["count"] == 40
    assert stats["splits"]["train"]["per_label"]["weather"] == 10


def test_register_rejects_bad_names(store, tmp_path):
    ds = build_text_dataset(tmp_path / "toy")
    with pytest.raises(ValueError, match="bad dataset name"):
        store.register_dataset("", ds)
    with pytest.raises(ValueError, match="bad dataset name"):
        store.register_dataset("a/b", ds)


def test_register_validates_the_files(store, tmp_path):
    with pytest.raises((OSError, ValueError)):
        store.register_dataset("ghost", tmp_path / "nowhere")


def test_unknown_dataset_lookups(store):
    with pytest.raises(KeyError, match="unknown dataset"):
        store.dataset_entry("ghost")
    with pytest.raises(KeyError, match="unknown dataset"):
        store.delete_dataset("ghost")


# -- store: run lifecycle --------------------------------------------------

def test_submit_run_journals_and_indexes(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    lines = _journal_lines(store_with_toy, run_id)
    assert [l["type"] for l in lines] == ["created", "state"]
    assert lines[1]["state"] == "queued"
    record = store_with_toy.load_run(run_id)
    assert record.state == "queued" and record.config == SMALL
    with open(store_with_toy._index_path, encoding="utf-8") as fh:
        index = json.load(fh)
    assert index[run_id]["state"] == "queued"
    assert index[run_id]["dataset"] == "toy"


def test_submit_run_validates_config_and_dataset(store_with_toy):
    with pytest.raises(ValueError, match="unknown config field"):
        store_with_toy.submit_run({**SMALL, "detctor": "adb"})
    with pytest.raises(ValueError, match="unknown dataset"):
        store_with_toy.submit_run({**SMALL, "dataset": "ghost"})


def test_journal_replay_roundtrip(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    store_with_toy.append_state(run_id, "running")
    store_with_toy.append_event(run_id, {"step": "sampling", "message": "ok"})
    store_with_toy.append_artifact(run_id, "pipeline", "/tmp/p.json")
    record = store_with_toy.load_run(run_id)
    assert record.state == "running"
    assert [(e["step"], e["message"]) for e in record.events] == [("sampling", "ok")]
    assert record.artifacts == {"pipeline": "/tmp/p.json"}
    assert [r.run_id for r in store_with_toy.list_runs("running")] == [run_id]
    assert store_with_toy.list_runs("queued") == []


def test_load_run_unknown(store):
    with pytest.raises(KeyError, match="unknown run"):
        store.load_run("01GHOST")


def test_cancel_queued_run_fails_immediately(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    record = store_with_toy.cancel_run(run_id)
    assert record.state == "failed" and record.error == "cancelled"
    assert record.finished_at is not None


def test_cancel_running_run_raises_the_flag(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    store_with_toy.append_state(run_id, "running")
    assert not store_with_toy.cancel_requested(run_id)
    record = store_with_toy.cancel_run(run_id)
    assert record.state == "running"
    assert store_with_toy.cancel_requested(run_id)


def test_cancel_terminal_run_is_left_alone(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    store_with_toy.append_state(run_id, "running")
    store_with_toy.append_state(run_id, "finished")
    record = store_with_toy.cancel_run(run_id)
    assert record.state == "finished" and record.error is None
    assert not store_with_toy.cancel_requested(run_id)


def test_recover_marks_midflight_runs_interrupted(store_with_toy):
    queued = store_with_toy.submit_run(dict(SMALL))
    running = store_with_toy.submit_run(dict(SMALL))
    store_with_toy.append_state(running, "running")
    finished = store_with_toy.submit_run(dict(SMALL))
    store_with_toy.append_state(finished, "running")
    store_with_toy.append_state(finished, "finished")

    assert store_with_toy.recover() == [running]
    assert store_with_toy.load_run(queued).state == "queued"
    rec = store_with_toy.load_run(running)
    assert rec.state == "failed" and rec.error == "interrupted"
    assert store_with_toy.load_run(finished).state == "finished"
    assert store_with_toy.integrity_check() == []
    with open(store_with_toy._index_path, encoding="utf-8") as fh:
        index = json.load(fh)
    assert index[running]["state"] == "failed"


def test_integrity_spots_garbage_journal_lines(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    with open(store_with_toy.journal_path(run_id), "a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    problems = store_with_toy.integrity_check()
    assert any("unparseable journal line" in p for p in problems)


def test_integrity_spots_illegal_transitions(store):
    run_dir = store.run_dir("01BAD")
    run_dir.mkdir(parents=True)
    lines = [{"ts": "t0", "type": "created", "config": {"dataset": "toy"}},
             {"ts": "t1", "type": "state", "state": "queued"},
             {"ts": "t2", "type": "state", "state": "finished"}]
    with open(store.journal_path("01BAD"), "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")
    problems = store.integrity_check()
    assert any("illegal transition queued -> finished" in p for p in problems)


def test_integrity_spots_index_drift(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    with open(store_with_toy._index_path, encoding="utf-8") as fh:
        index = json.load(fh)
    index[run_id]["state"] = "finished"
    index["01GHOST"] = {"state": "queued"}
    with open(store_with_toy._index_path, "w", encoding="utf-8") as fh:
        json.dump(index, fh)
    problems = store_with_toy.integrity_check()
    assert any(f"{run_id}: index state finished != journal state queued" in p
               for p in problems)
    assert any("index lists unknown run: 01GHOST" in p for p in problems)


def test_delete_dataset_blocked_by_active_runs(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    with pytest.raises(ReferencedError, match="referenced by active runs"):
        store_with_toy.delete_dataset("toy")
    store_with_toy.cancel_run(run_id)
    store_with_toy.delete_dataset("toy")
    assert store_with_toy.list_datasets() == []


# -- worker ----------------------------------------------------------------

def test_pool_requires_at_least_one_worker(store):
    with pytest.raises(ValueError, match="worker count must be >= 1"):
        WorkerPool(store, 0)


def test_pool_drains_jobs_in_submission_order(store):
    order = []

    def job(_store, run_id):
        order.append(run_id)
        time.sleep(0.005)

    pool = WorkerPool(store, 1, job_fn=job)
    pool.start()
    for rid in ("01A", "01B", "01C"):
        pool.submit(rid)
    pool.drain(timeout=5)
    pool.stop()
    assert order == ["01A", "01B", "01C"]


def test_pool_resumes_queued_runs_on_start(store_with_toy):
    first = store_with_toy.submit_run(dict(SMALL))
    second = store_with_toy.submit_run(dict(SMALL))
    seen = []
    pool = WorkerPool(store_with_toy, 1, job_fn=lambda s, rid: seen.append(rid))
    pool.start()
    pool.drain(timeout=5)
    pool.stop()
    assert seen == [first, second]


def test_execute_run_end_to_end(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    execute_run(store_with_toy, run_id)
    record = store_with_toy.load_run(run_id)
    assert record.state == "finished" and record.error is None
    assert [e["step"] for e in record.events] == PIPELINE_STEPS
    assert set(record.artifacts) == {"pipeline", "report", "detector_eval"}
    for path in record.artifacts.values():
        assert json.load(open(path, encoding="utf-8"))
    report = load_report(store_with_toy, run_id)
    assert isinstance(report, MetricsReport)
    assert report.context["dataset"] == "toy"


def test_execute_run_skips_nonqueued_runs(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    execute_run(store_with_toy, run_id)
    before = store_with_toy.journal_path(run_id).read_bytes()
    execute_run(store_with_toy, run_id)
    assert store_with_toy.journal_path(run_id).read_bytes() == before


def test_execute_run_survives_job_errors(store_with_toy):
    run_id = store_with_toy.submit_run({**SMALL, "discover": "dec"})
    execute_run(store_with_toy, run_id)  # must not raise
    record = store_with_toy.load_run(run_id)
    assert record.state == "failed"
    assert record.error.startswith(
        "train_discovery: method registered but not implemented: dec")
    worker_events = [e for e in record.events if e["step"] == "worker"]
    assert len(worker_events) == 1
    assert "NotImplementedError" in worker_events[0]["message"]


def test_execute_run_honors_preexisting_cancel_flag(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    (store_with_toy.run_dir(run_id) / "cancel.flag").touch()
    execute_run(store_with_toy, run_id)
    record = store_with_toy.load_run(run_id)
    assert record.state == "failed" and record.error == "cancelled"
    assert record.events[-1]["step"] == "sampling"
    assert record.events[-1]["message"] == "run cancelled at step boundary"


def test_load_report_requires_the_artifact(store_with_toy):
    run_id = store_with_toy.submit_run(dict(SMALL))
    with pytest.raises(KeyError, match="has no report artifact"):
        load_report(store_with_toy, run_id)


# -- HTTP API --------------------------------------------------------------

@pytest.fixture(scope="module")
def service(tmp_path_factory):
    """One app over a store with four drained runs plus one left queued."""
    root = tmp_path_factory.mktemp("service")
    store = RunStore(root / "data")
    pool = WorkerPool(store, 1)
    app = create_app(store, pool)
    client = TestClient(app)
    ds_dir = build_text_dataset(root / "toy")
    assert client.post("/api/v1/datasets",
                       json={"name": "toy", "path": str(ds_dir),
                             "format": "tsv"}).status_code == 200

    runs = {}
    # distinct kir per run keeps the sweep view free of duplicate keys
    for key, extra in (("full", {"kir": 0.5}),
                       ("detect", {"kir": 0.75, "task": "detect"}),
                       ("discover", {"kir": 0.25, "task": "discover"}),
                       ("failed", {"kir": 0.5, "discover": "dec"})):
        resp = client.post("/api/v1/runs", json={**SMALL, **extra})
        assert resp.status_code == 200
        runs[key] = resp.json()["run_id"]
    pool.drain(timeout=120)
    runs["queued"] = store.submit_run(dict(SMALL))  # never handed to the pool
    yield {"client": client, "store": store, "runs": runs}
    pool.stop()


def test_config_schema_endpoint(service):
    body = service["client"].get("/api/v1/config-schema").json()
    assert set(body) == {"fields", "methods", "views"}
    assert body["fields"] == json.loads(json.dumps([dict(f) for f in CONFIG_SCHEMA]))
    assert body["methods"]["detect"] == ["msp", "doc", "openmax", "deepunk", "adb"]
    assert len(body["methods"]["registered_unimplemented"]) == 7
    assert body["views"] == list(VIEW_TAGS)


def test_dataset_endpoints(service):
    client = service["client"]
    names = [d["name"] for d in client.get("/api/v1/datasets").json()]
    assert names == ["toy"]
    stats = client.get("/api/v1/datasets/toy/stats")
    assert stats.status_code == 200
    assert stats.json()["splits"]["test"]["count"] == 16
    assert client.get("/api/v1/datasets/ghost/stats").status_code == 404
    resp = client.post("/api/v1/datasets",
                       json={"name": "bad/name", "path": "/nowhere"})
    assert resp.status_code == 400


def test_submit_rejects_bad_configs(service):
    client = service["client"]
    resp = client.post("/api/v1/runs", json={**SMALL, "detctor": "x"})
    assert resp.status_code == 400
    assert "unknown config field" in resp.json()["detail"]
    resp = client.post("/api/v1/runs", json={**SMALL, "dataset": "ghost"})
    assert resp.status_code == 400


def test_run_listing_and_detail(service):
    client, runs = service["client"], service["runs"]
    listing = client.get("/api/v1/runs").json()
    assert {r["run_id"] for r in listing} >= set(runs.values())
    finished = client.get("/api/v1/runs", params={"state": "finished"}).json()
    finished_ids = {r["run_id"] for r in finished}
    assert {runs["full"], runs["detect"], runs["discover"]} <= finished_ids
    assert runs["failed"] not in finished_ids

    detail = client.get(f"/api/v1/runs/{runs['full']}").json()
    assert detail["state"] == "finished"
    assert [e["step"] for e in detail["events"]] == PIPELINE_STEPS
    assert set(detail["artifacts"]) == {"pipeline", "report", "detector_eval"}

    failed = client.get(f"/api/v1/runs/{runs['failed']}").json()
    assert failed["state"] == "failed"
    assert failed["error"].startswith("train_discovery: ")

    assert client.get("/api/v1/runs/01GHOST").status_code == 404
    assert client.post("/api/v1/runs/01GHOST/cancel").status_code == 404


def test_cancel_endpoint_fails_queued_run(service):
    client, store = service["client"], service["store"]
    run_id = store.submit_run(dict(SMALL))
    body = client.post(f"/api/v1/runs/{run_id}/cancel").json()
    assert body["state"] == "failed" and body["error"] == "cancelled"


def test_report_served_byte_for_byte(service):
    client, store, runs = service["client"], service["store"], service["runs"]
    resp = client.get(f"/api/v1/runs/{runs['full']}/report")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/json"
    artifact = store.load_run(runs["full"]).artifacts["report"]
    assert resp.content == open(artifact, "rb").read()
    body = resp.json()
    assert body["format"] == "intentlab-metrics" and body["version"] == 1


def test_report_conflicts(service):
    client, runs = service["client"], service["runs"]
    assert client.get("/api/v1/runs/01GHOST/report").status_code == 404
    resp = client.get(f"/api/v1/runs/{runs['queued']}/report")
    assert resp.status_code == 409 and "queued" in resp.json()["detail"]
    assert client.get(f"/api/v1/runs/{runs['failed']}/report").status_code == 409


def test_views_for_a_full_run(service):
    client, runs = service["client"], service["runs"]
    for tag in VIEW_TAGS:
        resp = client.get(f"/api/v1/runs/{runs['full']}/views/{tag}")
        assert resp.status_code == 200, (tag, resp.json())
        assert resp.json()["view"] == tag


def test_view_payloads_are_cached_and_stable(service):
    client, store, runs = service["client"], service["store"], service["runs"]
    first = client.get(f"/api/v1/runs/{runs['full']}/views/confusion").json()
    cache = store.artifacts_dir(runs["full"]) / "views" / "confusion.json"
    assert cache.exists()
    again = client.get(f"/api/v1/runs/{runs['full']}/views/confusion").json()
    assert first == again


def test_sweep_view_collects_finished_runs(service):
    client, runs = service["client"], service["runs"]
    body = client.get(f"/api/v1/runs/{runs['full']}/views/sweep_curve").json()
    by_metric = {s["metric"]: s for s in body["series"]}
    assert set(by_metric) == {"known_acc", "open_nmi"}
    # full, detect-only and discover-only runs share dataset and methods
    assert [p["kir"] for p in by_metric["known_acc"]["points"]] == [0.25, 0.5, 0.75]


def test_views_unsupported_by_method_family(service):
    client, runs = service["client"], service["runs"]
    resp = client.get(f"/api/v1/runs/{runs['detect']}/views/keywords")
    assert resp.status_code == 409
    assert "needs discovered clusters" in resp.json()["detail"]
    resp = client.get(f"/api/v1/runs/{runs['discover']}/views/confidence_histogram")
    assert resp.status_code == 409
    resp = client.get(f"/api/v1/runs/{runs['discover']}/views/confusion")
    assert resp.status_code == 409
    # discovery centers and keywords exist without a detector
    assert client.get(
        f"/api/v1/runs/{runs['discover']}/views/center_2d").status_code == 200
    assert client.get(
        f"/api/v1/runs/{runs['discover']}/views/keywords").status_code == 200


def test_view_errors(service):
    client, runs = service["client"], service["runs"]
    resp = client.get(f"/api/v1/runs/{runs['full']}/views/heatmap")
    assert resp.status_code == 404 and "unknown view" in resp.json()["detail"]
    assert client.get("/api/v1/runs/01GHOST/views/confusion").status_code == 404
    resp = client.get(f"/api/v1/runs/{runs['queued']}/views/confusion")
    assert resp.status_code == 409


def test_predict_endpoint_routes_utterances(service):
    client, runs = service["client"], service["runs"]
    body = {"utterances": [{"text": "check my account balance"},
                           {"id": "q9", "text": "play some jazz music"}]}
    resp = client.post(f"/api/v1/runs/{runs['full']}/predict", json=body)
    assert resp.status_code == 200
    preds = resp.json()["predictions"]
    assert [p["utterance_id"] for p in preds] == ["q-0", "q9"]
    for p in preds:
        assert p["kind"] in ("known", "open")
        if p["kind"] == "known":
            assert "label" in p and "cluster_id" not in p
        else:
            assert "cluster_id" in p and "keywords" in p


def test_predict_conflicts_and_validation(service):
    client, runs = service["client"], service["runs"]
    body = {"utterances": [{"text": "hello"}]}
    assert client.post("/api/v1/runs/01GHOST/predict", json=body).status_code == 404
    resp = client.post(f"/api/v1/runs/{runs['queued']}/predict", json=body)
    assert resp.status_code == 409
    resp = client.post(f"/api/v1/runs/{runs['full']}/predict",
                       json={"utterances": [{"id": "q1"}]})
    assert resp.status_code == 400
    assert "needs a 'text' field" in resp.json()["detail"]


def test_delete_dataset_endpoint_guard(tmp_path):
    store = RunStore(tmp_path / "data")
    pool = WorkerPool(store, 1, job_fn=lambda s, rid: None)
    client = TestClient(create_app(store, pool))
    ds_dir = build_text_dataset(tmp_path / "toy")
    client.post("/api/v1/datasets",
                json={"name": "toy", "path": str(ds_dir), "format": "tsv"})
    run_id = store.submit_run(dict(SMALL))
    resp = client.delete("/api/v1/datasets/toy")
    assert resp.status_code == 409
    client.post(f"/api/v1/runs/{run_id}/cancel")
    assert client.delete("/api/v1/datasets/toy").json() == {"deleted": "toy"}
    assert client.delete("/api/v1/datasets/toy").status_code == 404
    pool.stop()


def test_console_assets_mounted_when_configured(tmp_path):
    console = tmp_path / "dist"
    console.mkdir()
    (console / "index.html").write_text("<!doctype html><title>console</title>",
                                        encoding="utf-8")
    (console / "app.js").write_text("console.log('ready')", encoding="utf-8")
    store = RunStore(tmp_path / "data")
    pool = WorkerPool(store, 1, job_fn=lambda s, rid: None)
    client = TestClient(create_app(store, pool, console_dir=console))
    root = client.get("/")
    assert root.status_code == 200
    assert "console" in root.text
    assert client.get("/app.js").status_code == 200
    # the API keeps priority over the static mount
    assert client.get("/api/v1/datasets").status_code == 200
    pool.stop()


def test_console_dir_must_exist(tmp_path):
    store = RunStore(tmp_path / "data")
    pool = WorkerPool(store, 1, job_fn=lambda s, rid: None)
    with pytest.raises(ValueError, match="console directory"):
        create_app(store, pool, console_dir=tmp_path / "missing")
    pool.stop()
