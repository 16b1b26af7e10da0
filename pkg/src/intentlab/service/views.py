"""Analysis-view payloads for finished runs, cached on first computation.

Each view recomputes from the run's saved pipeline and dataset, writes its
payload under artifacts/views/, and serves the cached bytes afterwards so
repeated calls return identical content.
"""

from __future__ import annotations

import json

import numpy as np

from ..analysis import confidence_histogram, project_2d, sweep_curves
from ..corpus import OPEN_LABEL
from ..detect import detect_predict
from ..pipeline import TrainedPipeline
from ..utils import atomic_write_text, canonical_json
from .store import RunStore

VIEW_TAGS = ("confidence_histogram", "representation_2d", "center_2d",
             "confusion", "sweep_curve", "keywords")


class ViewUnsupported(Exception):
    """The run's method family cannot produce this view."""


def _load_pipeline(store: RunStore, run_id: str) -> TrainedPipeline:
    record = store.load_run(run_id)
    if record.state != "finished":
        raise ViewUnsupported(f"run {run_id} is {record.state}; views need a finished run")
    path = record.artifacts.get("pipeline")
    if path is None:
        raise ViewUnsupported(f"run {run_id} has no pipeline artifact")
    return TrainedPipeline.load(path)


def _report(store: RunStore, run_id: str) -> dict:
    record = store.load_run(run_id)
    path = record.artifacts.get("report")
    if path is None:
        raise ViewUnsupported(f"run {run_id} has no report artifact")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def get_view(store: RunStore, run_id: str, tag: str) -> dict:
    if tag not in VIEW_TAGS:
        raise KeyError(f"unknown view: {tag} (choose from {', '.join(VIEW_TAGS)})")
    cache = store.artifacts_dir(run_id) / "views" / f"{tag}.json"
    if cache.exists():
        with open(cache, encoding="utf-8") as fh:
            return json.load(fh)
    payload = _build_view(store, run_id, tag)
    cache.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(cache, canonical_json(payload))
    return payload


def _build_view(store: RunStore, run_id: str, tag: str) -> dict:
    trained = _load_pipeline(store, run_id)
    if tag == "confidence_histogram":
        return _confidence_histogram(store, trained)
    if tag == "representation_2d":
        return _representation_2d(store, trained)
    if tag == "center_2d":
        return _center_2d(trained)
    if tag == "confusion":
        return _confusion(store, run_id, trained)
    if tag == "sweep_curve":
        return _sweep_curve(store, run_id, trained)
    if tag == "keywords":
        return _keywords(trained)
    raise KeyError(f"unknown view: {tag}")


def _test_features(store: RunStore, trained: TrainedPipeline):
    dataset = store.load_dataset(trained.dataset_name)
    utts = dataset.splits["test"]
    return utts, trained.featurizer.transform(utts)


def _confidence_histogram(store: RunStore, trained: TrainedPipeline) -> dict:
    if trained.detector is None:
        raise ViewUnsupported(
            "confidence_histogram needs a detection method with confidence scores; "
            "this run trained discovery only")
    utts, features = _test_features(store, trained)
    result = detect_predict(trained.detector, features)
    known = set(trained.plan.known_labels)
    mask = [u.gold_label in known for u in utts]
    return {"view": "confidence_histogram",
            **confidence_histogram(result, mask, bins=10)}


def _representation_2d(store: RunStore, trained: TrainedPipeline) -> dict:
    utts, features = _test_features(store, trained)
    known = set(trained.plan.known_labels)
    if trained.detector is not None and trained.detector.head is not None:
        space = trained.detector.head.encoder.forward(features.values)
    else:
        space = features.values
    centers = radii = None
    if trained.detector is not None and trained.detector.method == "adb":
        centers = trained.detector.params["centers"]
        radii = trained.detector.params["radii"].tolist()
    projected = project_2d(space, centers)
    payload = {"view": "representation_2d", "points": projected["points"],
               "explained": projected["explained"],
               "gold_known": [u.gold_label in known for u in utts],
               "gold_labels": [u.gold_label for u in utts]}
    if trained.detector is not None:
        result = detect_predict(trained.detector, features)
        payload["predicted_open"] = [l == OPEN_LABEL for l in result.labels]
    if centers is not None:
        payload["centers"] = projected["centers"]
        payload["center_labels"] = list(trained.detector.labels)
        payload["radii"] = radii
    return payload


def _center_2d(trained: TrainedPipeline) -> dict:
    if trained.clusters is not None and trained.clusters.centers is not None:
        centers = trained.clusters.centers
        labels = [f"cluster {cid}" for cid in range(trained.clusters.k)]
        is_open = [bool(trained.cluster_open.get(cid, False))
                   for cid in range(trained.clusters.k)]
    elif trained.detector is not None and trained.detector.method == "adb":
        centers = trained.detector.params["centers"]
        labels = list(trained.detector.labels)
        is_open = [False] * len(labels)
    else:
        raise ViewUnsupported(
            "center_2d needs a method that produces centers (clustering or "
            "boundary detection); this run has none")
    if centers.shape[0] < 2:
        raise ViewUnsupported("center_2d needs at least 2 centers")
    projected = project_2d(np.asarray(centers))
    return {"view": "center_2d", "centers": projected["points"],
            "labels": labels, "is_open": is_open}


def _confusion(store: RunStore, run_id: str, trained: TrainedPipeline) -> dict:
    if trained.detector is None:
        raise ViewUnsupported(
            "confusion needs label predictions from a detection method; "
            "this run trained discovery only")
    report = _report(store, run_id)
    return {"view": "confusion", "labels": report["confusion"]["labels"],
            "matrix": report["confusion"]["matrix"],
            "per_class": report["per_class"]}


def _sweep_curve(store: RunStore, run_id: str, trained: TrainedPipeline) -> dict:
    """Series over every finished run sharing this run's dataset and
    methods; single-run selections yield single-point series."""
    records = []
    for record in store.list_runs("finished"):
        cfg = record.config
        if (cfg.get("dataset") != trained.dataset_name
                or cfg.get("detect", "adb") != trained.config.detect
                or cfg.get("discover", "semi_seeded") != trained.config.discover):
            continue
        path = record.artifacts.get("report")
        if path is None:
            continue
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
        records.append({"dataset": cfg.get("dataset"),
                        "kir": cfg.get("kir", 0.5), "lr": cfg.get("lr", 0.5),
                        "metrics": {"known_acc": report["known_acc"],
                                    "open_nmi": report["open_nmi"]}})
    return {"view": "sweep_curve", **sweep_curves(records)}


def _keywords(trained: TrainedPipeline) -> dict:
    if not trained.keyword_recs:
        raise ViewUnsupported(
            "keywords needs discovered clusters; this run trained detection only")
    clusters = []
    for cid in sorted(trained.keyword_recs):
        rec = trained.keyword_recs[cid]
        clusters.append({"cluster_id": cid,
                         "is_open": bool(trained.cluster_open.get(cid, False)),
                         "keywords": [{"keyword": k, "confidence": c}
                                      for k, c in rec.items]})
    return {"view": "keywords", "clusters": clusters}
