"""Metrics and analysis-view payloads.

Accuracy over known intents, normalized mutual information over open
intents, confusion breakdowns, confidence-score histograms, 2-D projections
of representations and centers, and known-ratio/labeled-ratio sweep series.
Everything here is pure and deterministic; view payloads are plain dicts
ready for JSON serialization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .corpus import OPEN_LABEL
from .detect import DetectionResult
from .utils import canonical_json

# The evaluation conventions every report carries, so numbers stay
# comparable across runs and tools.
PROTOCOL_NOTE = (
    "known_acc: accuracy over gold-known test utterances; predicting <open> on a "
    "known-gold utterance counts as an error. open_nmi: NMI (geometric-mean "
    "normalization) over gold-open test utterances only; open-routed utterances "
    "group by cluster id and misrouted ones by their predicted known label. "
    "The test split is never restricted by the known intent ratio; open-class "
    "golds are remapped to <open> for detection scoring.")


def accuracy_known(preds, golds) -> float:
    """Fraction correct over utterances whose gold label is a known intent."""
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ValueError("predictions and golds differ in length")
    if not preds:
        raise ValueError("cannot compute accuracy on empty input")
    correct = sum(1 for p, g in zip(preds, golds) if p == g)
    return correct / len(preds)


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _dense_ids(labels) -> tuple[np.ndarray, int]:
    index: dict = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, l in enumerate(labels):
        out[i] = index.setdefault(l, len(index))
    return out, len(index)


def nmi(a, b) -> float:
    """Normalized mutual information with geometric-mean normalization.

    Constant labelings have zero entropy; two constant labelings describe
    the same one-block partition (value 1), one constant against a varied
    one shares no information (value 0).
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValueError("labelings differ in length")
    if not a:
        raise ValueError("cannot compute NMI on empty input")
    ai, na = _dense_ids(a)
    bi, nb = _dense_ids(b)
    if na == 1 and nb == 1:
        return 1.0
    if na == 1 or nb == 1:
        return 0.0
    joint = np.zeros((na, nb))
    np.add.at(joint, (ai, bi), 1.0)
    n = joint.sum()
    pij = joint / n
    pa = pij.sum(axis=1)
    pb = pij.sum(axis=0)
    mask = pij > 0
    mi = float((pij[mask] * np.log(pij[mask] / np.outer(pa, pb)[mask])).sum())
    ha = _entropy(joint.sum(axis=1))
    hb = _entropy(joint.sum(axis=0))
    return float(min(1.0, max(0.0, mi / np.sqrt(ha * hb))))


def confusion_views(preds, golds) -> dict:
    """Per-class correct/false counts plus the fine-grained misprediction
    matrix (gold row, predicted column)."""
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ValueError("predictions and golds differ in length")
    if not preds:
        raise ValueError("cannot build confusion views on empty input")
    labels = sorted(set(golds) | set(preds))
    index = {l: i for i, l in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for p, g in zip(preds, golds):
        matrix[index[g]][index[p]] += 1
    per_class = {}
    for g in sorted(set(golds)):
        row = matrix[index[g]]
        correct = row[index[g]]
        per_class[g] = {"correct": correct, "false": sum(row) - correct}
    return {"labels": labels, "matrix": matrix, "per_class": per_class}


def confidence_histogram(result: DetectionResult, known_mask, bins: int = 10) -> dict:
    """Score histograms for the gold-known and gold-open populations."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2: {bins}")
    known_mask = np.asarray(known_mask, dtype=bool)
    if known_mask.shape[0] != result.n:
        raise ValueError("mask length does not match detections")
    edges = np.linspace(0.0, 1.0, bins + 1)
    known_counts, _ = np.histogram(result.scores[known_mask], bins=edges)
    open_counts, _ = np.histogram(result.scores[~known_mask], bins=edges)
    return {"edges": edges.tolist(), "known": known_counts.tolist(),
            "open": open_counts.tolist(), "semantics": result.semantics}


def project_2d(x, centers=None) -> dict:
    """Top-2 principal components via covariance eigendecomposition.

    Sign convention: each component's largest-magnitude loading is positive.
    Centers (if given) are projected with the same transform.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("projection needs an n x d input with n >= 2, d >= 2")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 1e-15:
        raise ValueError("zero-variance data cannot be projected")
    order = np.argsort(evals)[::-1][:2]
    comps = evecs[:, order].T
    for i in range(2):
        lead = np.argmax(np.abs(comps[i]))
        if comps[i, lead] < 0:
            comps[i] = -comps[i]
    out = {"points": (xc @ comps.T).tolist(),
           "explained": [float(evals[order[0]]), float(evals[order[1]])],
           "components": comps.tolist()}
    if centers is not None:
        centers = np.asarray(centers, dtype=np.float64)
        out["centers"] = ((centers - mean) @ comps.T).tolist()
    return out


# ---------------------------------------------------------------------------
# sweep curves

def sweep_curves(records) -> dict:
    """Line-chart series per (dataset, metric): points sorted by known
    intent ratio then labeled ratio; duplicate (kir, lr) keys are an error.

    Each record: {dataset, kir, lr, metrics: {name: value}}. Values pass
    through untouched, so ingested tables keep their original scale.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to chart")
    series: dict = {}
    seen = set()
    for rec in records:
        for metric, value in rec["metrics"].items():
            key = (rec["dataset"], metric, rec["kir"], rec["lr"])
            if key in seen:
                raise ValueError(
                    f"duplicate sweep key: dataset={rec['dataset']} metric={metric} "
                    f"kir={rec['kir']} lr={rec['lr']}")
            seen.add(key)
            series.setdefault((rec["dataset"], metric), []).append(
                (rec["kir"], rec["lr"], value))
    out = {"series": []}
    for (dataset, metric) in sorted(series):
        pts = sorted(series[(dataset, metric)], key=lambda t: (t[0], t[1]))
        out["series"].append({
            "dataset": dataset, "metric": metric,
            "points": [{"kir": p[0], "lr": p[1], "value": p[2]} for p in pts],
            "values": [p[2] for p in pts]})
    return out


def load_report_table(path) -> list[dict]:
    """Read a tab-separated metrics table: header
    ``dataset  kir  lr  <metric> ...``, one row per setting."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or reader.fieldnames[:3] != ["dataset", "kir", "lr"]:
            raise ValueError(f"{path}: expected header starting 'dataset\\tkir\\tlr'")
        metric_cols = reader.fieldnames[3:]
        if not metric_cols:
            raise ValueError(f"{path}: no metric columns")
        records = []
        for row in reader:
            records.append({"dataset": row["dataset"], "kir": float(row["kir"]),
                            "lr": float(row["lr"]),
                            "metrics": {m: float(row[m]) for m in metric_cols}})
    return records


# ---------------------------------------------------------------------------
# the metrics report

@dataclass
class MetricsReport:
    """Evaluation summary for one run; serializes canonically so identical
    runs produce byte-identical reports."""

    known_acc: float
    open_nmi: float
    per_class: dict
    confusion: dict
    protocol: str = PROTOCOL_NOTE
    context: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {"format": "intentlab-metrics", "version": 1,
                "known_acc": self.known_acc, "open_nmi": self.open_nmi,
                "per_class": self.per_class, "confusion": self.confusion,
                "protocol": self.protocol, "context": self.context}

    def to_json(self) -> str:
        return canonical_json(self.to_jsonable())

    @classmethod
    def from_jsonable(cls, obj: dict) -> "MetricsReport":
        if obj.get("format") != "intentlab-metrics":
            raise ValueError(f"not a metrics report: {obj.get('format')!r}")
        return cls(obj["known_acc"], obj["open_nmi"], obj["per_class"],
                   obj["confusion"], obj["protocol"], obj.get("context", {}))


def compute_metrics_report(detected_labels, gold_labels, open_group_pred,
                           open_group_gold, context=None) -> MetricsReport:
    """Assemble the report from the detection view and the open grouping.

    detected_labels/gold_labels: (K+1)-way labels over the full eval split
    (open-class golds already remapped to the open label).
    open_group_pred/open_group_gold: grouping ids over the gold-open subset.
    """
    detected_labels = list(detected_labels)
    gold_labels = list(gold_labels)
    known_rows = [i for i, g in enumerate(gold_labels) if g != OPEN_LABEL]
    if known_rows:
        acc = accuracy_known([detected_labels[i] for i in known_rows],
                             [gold_labels[i] for i in known_rows])
    else:
        acc = 0.0
    open_group_pred = list(open_group_pred)
    open_group_gold = list(open_group_gold)
    value = nmi(open_group_pred, open_group_gold) if open_group_pred else 0.0
    views = confusion_views(detected_labels, gold_labels)
    return MetricsReport(acc, value, views["per_class"],
                         {"labels": views["labels"], "matrix": views["matrix"]},
                         context=dict(context or {}))
