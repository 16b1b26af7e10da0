"""End-to-end orchestration: sample a corpus, featurize, train detection on
labeled known intents, route the unlabeled pool, feed predicted-known +
detected-open + originally-labeled data into discovery, and attach keyword
recommendations to the discovered clusters.

The config schema here is the single source of truth for every tunable:
the CLI builds its flags from it and the service serves it to the console
for form generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import MetricsReport, compute_metrics_report, confusion_views, nmi
from .corpus import OPEN_LABEL, Dataset, make_sampling_plan, SamplingPlan
from .detect import DETECT_METHODS, DetectorModel, detect_predict, fit_detector
from .discover import (DISCOVER_METHODS, PLACEHOLDER_METHODS, ClusterModel,
                       estimate_k, fit_discovery)
from .featurize import (FEATURIZER_KINDS, FeatureMatrix, TfidfFeaturizer,
                        TrainConfig, featurizer_from_jsonable, make_featurizer)
from .keywords import KeywordRecommendation, load_stopwords, recommend_keywords
from .records import RunRecord
from .utils import atomic_write_text, canonical_json, new_ulid

TASKS = ("pipeline", "detect", "discover")

PIPELINE_FORMAT = "intentlab-pipeline"
PIPELINE_VERSION = 1


class PipelineCancelled(Exception):
    """Raised when a cancellation request is honored at a step boundary."""

    def __init__(self, step: str):
        super().__init__(f"cancelled before step: {step}")
        self.step = step


def _field(name, ftype, default, group, help_text, choices=None, required=False,
           nullable=False):
    return {"name": name, "type": ftype, "default": default, "group": group,
            "help": help_text, "choices": choices, "required": required,
            "nullable": nullable}


CONFIG_SCHEMA = (
    _field("dataset", "str", None, "common", "registered dataset name", required=True),
    _field("task", "choice", "pipeline", "common", "what to train",
           choices=TASKS),
    _field("kir", "float", 0.5, "common", "known intent ratio in (0, 1]"),
    _field("lr", "float", 0.5, "common", "labeled ratio per known class in (0, 1]"),
    _field("seed", "int", 0, "common", "seed for every random stage"),
    _field("featurizer_type", "choice", "tfidf", "featurizer", "feature provider",
           choices=FEATURIZER_KINDS),
    _field("featurizer_path", "str", None, "featurizer",
           "vector or embedding file (wordvec/precomputed)", nullable=True),
    _field("max_features", "int", 2000, "featurizer", "tf-idf vocabulary cap"),
    _field("detect", "choice", "adb", "detection", "detection method",
           choices=DETECT_METHODS),
    _field("threshold", "float", 0.5, "detection", "softmax rejection threshold (msp)"),
    _field("alpha_doc", "float", 3.0, "detection", "Gaussian threshold multiplier (doc)"),
    _field("tail_size", "int", 20, "detection", "Weibull tail size (openmax)"),
    _field("revision_rank", "int", None, "detection",
           "how many top logits to revise (openmax); default min(3, K)", nullable=True),
    _field("k_lof", "int", 20, "detection", "neighbor count for LOF (deepunk)"),
    _field("lof_threshold", "float", 1.5, "detection", "LOF open threshold (deepunk)"),
    _field("margin_tune", "bool", False, "detection",
           "fine-tune the encoder with the cosine margin objective (deepunk)"),
    _field("margin", "float", 0.35, "detection", "cosine margin (deepunk)"),
    _field("margin_scale", "float", 30.0, "detection", "cosine logit scale (deepunk)"),
    _field("adb_epochs", "int", 300, "detection", "boundary-fitting epochs (adb)"),
    _field("adb_learning_rate", "float", 0.5, "detection", "boundary step size (adb)"),
    _field("hidden", "int", 128, "training", "encoder hidden width"),
    _field("repr_dim", "int", 64, "training", "encoder representation size"),
    _field("epochs", "int", 50, "training", "classifier training epochs"),
    _field("learning_rate", "float", 0.05, "training", "classifier step size"),
    _field("batch_size", "int", 32, "training", "classifier mini-batch size"),
    _field("discover", "choice", "semi_seeded", "discovery", "discovery method",
           choices=DISCOVER_METHODS + PLACEHOLDER_METHODS),
    _field("k", "int", None, "discovery",
           "cluster count; default is the dataset's total intent count", nullable=True),
    _field("linkage", "choice", "average", "discovery", "agglomerative linkage",
           choices=("average", "complete", "ward")),
    _field("discover_epochs", "int", 10, "discovery", "alignment training epochs"),
    _field("use_estimate_k", "bool", False, "discovery",
           "estimate the open cluster count from the detected-open pool"),
    _field("k_max", "int", None, "discovery", "estimation upper bound", nullable=True),
    _field("drop_fraction", "float", 0.5, "discovery", "small-cluster drop fraction"),
    _field("ngram_min", "int", 1, "keywords", "shortest keyword n-gram"),
    _field("ngram_max", "int", 2, "keywords", "longest keyword n-gram"),
    _field("keyword_level", "choice", "cluster", "keywords", "scoring level",
           choices=("cluster", "sentence")),
)

_SCHEMA_BY_NAME = {f["name"]: f for f in CONFIG_SCHEMA}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    task: str = "pipeline"
    kir: float = 0.5
    lr: float = 0.5
    seed: int = 0
    featurizer_type: str = "tfidf"
    featurizer_path: str | None = None
    max_features: int = 2000
    detect: str = "adb"
    threshold: float = 0.5
    alpha_doc: float = 3.0
    tail_size: int = 20
    revision_rank: int | None = None
    k_lof: int = 20
    lof_threshold: float = 1.5
    margin_tune: bool = False
    margin: float = 0.35
    margin_scale: float = 30.0
    adb_epochs: int = 300
    adb_learning_rate: float = 0.5
    hidden: int = 128
    repr_dim: int = 64
    epochs: int = 50
    learning_rate: float = 0.05
    batch_size: int = 32
    discover: str = "semi_seeded"
    k: int | None = None
    linkage: str = "average"
    discover_epochs: int = 10
    use_estimate_k: bool = False
    k_max: int | None = None
    drop_fraction: float = 0.5
    ngram_min: int = 1
    ngram_max: int = 2
    keyword_level: str = "cluster"

    def to_jsonable(self) -> dict:
        return {f["name"]: getattr(self, f["name"]) for f in CONFIG_SCHEMA}


_COERCERS = {"str": str, "float": float, "int": int}


def validate_config(obj: dict) -> ExperimentConfig:
    """Check a raw config dict against the schema; unknown fields, missing
    required fields, bad types, and out-of-range values all raise with the
    offending field named."""
    unknown = sorted(set(obj) - set(_SCHEMA_BY_NAME))
    if unknown:
        raise ValueError(f"unknown config field: {', '.join(unknown)}")
    values = {}
    for spec in CONFIG_SCHEMA:
        name = spec["name"]
        if name not in obj or obj[name] is None:
            if spec["required"]:
                raise ValueError(f"missing required config field: {name}")
            values[name] = spec["default"]
            continue
        raw = obj[name]
        if spec["type"] == "bool":
            if not isinstance(raw, bool):
                raise ValueError(f"{name} must be a boolean, got {raw!r}")
            values[name] = raw
        elif spec["type"] == "choice":
            token = str(raw).lower()
            if token not in spec["choices"]:
                raise ValueError(
                    f"{name} must be one of {', '.join(spec['choices'])}: got {raw!r}")
            values[name] = token
        else:
            try:
                values[name] = _COERCERS[spec["type"]](raw)
            except (TypeError, ValueError):
                raise ValueError(f"{name} must be a {spec['type']}, got {raw!r}") from None
    for name in ("kir", "lr"):
        if not 0.0 < values[name] <= 1.0:
            raise ValueError(f"{name} out of range (0, 1]: {values[name]}")
    if values["featurizer_type"] != "tfidf" and not values["featurizer_path"]:
        raise ValueError(
            f"featurizer_path is required for featurizer_type={values['featurizer_type']}")
    if values["ngram_min"] < 1 or values["ngram_max"] < values["ngram_min"]:
        raise ValueError(
            f"ngram_min/ngram_max must satisfy 1 <= min <= max: "
            f"{values['ngram_min']}..{values['ngram_max']}")
    for name in ("epochs", "discover_epochs", "adb_epochs"):
        if values[name] < 0:
            raise ValueError(f"{name} must be >= 0: {values[name]}")
    return ExperimentConfig(**values)


@dataclass
class PipelinePrediction:
    """One routed utterance: a known label, or an open cluster with its
    recommended keywords."""

    utterance_id: str
    kind: str
    confidence: float
    label: str | None = None
    cluster_id: int | None = None
    keywords: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("known", "open"):
            raise ValueError(f"unknown outcome kind: {self.kind!r}")
        if (self.kind == "known") == (self.label is None):
            raise ValueError("known outcomes carry a label, open outcomes do not")

    def to_jsonable(self) -> dict:
        out = {"utterance_id": self.utterance_id, "kind": self.kind,
               "confidence": self.confidence}
        if self.kind == "known":
            out["label"] = self.label
        else:
            out["cluster_id"] = self.cluster_id
            out["keywords"] = [{"keyword": k, "confidence": c}
                               for k, c in (self.keywords or ())]
        return out


@dataclass
class TrainedPipeline:
    """Everything needed to route new utterances: featurizer, detector,
    cluster model, and the per-cluster keyword state fitted at train time."""

    config: ExperimentConfig
    dataset_name: str
    plan: SamplingPlan
    featurizer: object
    detector: DetectorModel | None
    clusters: ClusterModel | None
    keyword_recs: dict[int, KeywordRecommendation] = field(default_factory=dict)
    cluster_open: dict[int, bool] = field(default_factory=dict)
    detector_eval: dict | None = None
    k: int | None = None

    def to_jsonable(self) -> dict:
        return {"format": PIPELINE_FORMAT, "version": PIPELINE_VERSION,
                "config": self.config.to_jsonable(),
                "dataset": self.dataset_name,
                "plan": self.plan.to_jsonable(),
                "featurizer": self.featurizer.to_jsonable(),
                "detector": self.detector.to_jsonable() if self.detector else None,
                "clusters": self.clusters.to_jsonable() if self.clusters else None,
                "keywords": {str(cid): rec.to_jsonable()
                             for cid, rec in self.keyword_recs.items()},
                "cluster_open": {str(cid): flag
                                 for cid, flag in self.cluster_open.items()},
                "detector_eval": self.detector_eval,
                "k": self.k}

    def save(self, path) -> None:
        atomic_write_text(path, canonical_json(self.to_jsonable()))

    @classmethod
    def from_jsonable(cls, obj: dict) -> "TrainedPipeline":
        if obj.get("format") != PIPELINE_FORMAT:
            raise ValueError(f"not a pipeline file: {obj.get('format')!r}")
        if obj.get("version") != PIPELINE_VERSION:
            raise ValueError(f"unsupported pipeline version: {obj.get('version')!r}")
        config = validate_config(obj["config"])
        featurizer = (TfidfFeaturizer.from_jsonable(obj["featurizer"])
                      if obj["featurizer"]["kind"] == "tfidf"
                      else featurizer_from_jsonable(obj["featurizer"]))
        detector = DetectorModel.from_jsonable(obj["detector"]) if obj["detector"] else None
        clusters = ClusterModel.from_jsonable(obj["clusters"]) if obj["clusters"] else None
        recs = {int(cid): KeywordRecommendation.from_jsonable(rec)
                for cid, rec in obj["keywords"].items()}
        flags = {int(cid): flag for cid, flag in obj["cluster_open"].items()}
        return cls(config, obj["dataset"], SamplingPlan.from_jsonable(obj["plan"]),
                   featurizer, detector, clusters, recs, flags,
                   obj.get("detector_eval"), obj.get("k"))

    @classmethod
    def load(cls, path) -> "TrainedPipeline":
        import json

        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonable(json.load(fh))


def _train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(hidden=config.hidden, repr_dim=config.repr_dim,
                       learning_rate=config.learning_rate, epochs=config.epochs,
                       batch_size=config.batch_size, seed=config.seed)


def _detect_params(config: ExperimentConfig) -> dict:
    return {"threshold": config.threshold, "alpha_doc": config.alpha_doc,
            "tail_size": config.tail_size, "revision_rank": config.revision_rank,
            "k_lof": config.k_lof, "lof_threshold": config.lof_threshold,
            "margin_tune": config.margin_tune, "margin": config.margin,
            "margin_scale": config.margin_scale, "adb_epochs": config.adb_epochs,
            "adb_learning_rate": config.adb_learning_rate}


def _discover_params(config: ExperimentConfig) -> dict:
    return {"linkage": config.linkage, "discover_epochs": config.discover_epochs,
            "hidden": config.hidden, "repr_dim": config.repr_dim,
            "learning_rate": config.learning_rate, "batch_size": config.batch_size}


def train_pipeline(config: ExperimentConfig, dataset: Dataset,
                   record: RunRecord | None = None, should_abort=None,
                   on_event=None) -> tuple[TrainedPipeline, RunRecord]:
    """Run the training procedure stepwise, journaling an event per step.

    ``should_abort`` is polled at every step boundary; a truthy return
    raises PipelineCancelled and fails the record with "cancelled".
    """
    if record is None:
        record = RunRecord(new_ulid(), config.to_jsonable())
    if record.state == "queued":
        record.transition("running")

    def event(step: str, message: str) -> None:
        e = record.append_event(step, message)
        if on_event is not None:
            on_event(e)

    def boundary(step: str) -> None:
        if should_abort is not None and should_abort():
            raise PipelineCancelled(step)

    step = "sampling"
    try:
        boundary(step)
        plan = make_sampling_plan(dataset, config.kir, config.lr, config.seed)
        event(step, f"known classes: {len(plan.known_labels)}/{len(dataset.label_set)}; "
                    f"labeled: {len(plan.labeled_ids)}; "
                    f"unlabeled pool: {len(plan.unlabeled_ids)}")

        step = "featurize"
        boundary(step)
        train_utts = dataset.splits["train"]
        featurizer = make_featurizer(
            {"type": config.featurizer_type, "path": config.featurizer_path,
             "max_features": config.max_features},
            train_utterances=train_utts)
        train_features = featurizer.transform(train_utts)
        event(step, f"{featurizer.kind} features: {train_features.n} x {train_features.dim}")

        row_of = {u.id: i for i, u in enumerate(train_utts)}
        labeled_rows = [row_of[uid] for uid in plan.labeled_ids]
        labeled_golds = [train_utts[r].gold_label for r in labeled_rows]
        unlabeled_rows = [row_of[uid] for uid in plan.unlabeled_ids]

        detector = None
        detector_eval = None
        if config.task in ("pipeline", "detect"):
            step = "train_detector"
            boundary(step)
            labeled_features = train_features.subset(plan.labeled_ids)
            detector = fit_detector(config.detect, labeled_features, labeled_golds,
                                    _detect_params(config), _train_config(config),
                                    config.seed)
            event(step, f"{config.detect} on {labeled_features.n} labeled utterances; "
                        f"K={len(detector.labels)}")

            step = "detector_eval"
            boundary(step)
            eval_utts = dataset.splits["eval"]
            eval_features = featurizer.transform(eval_utts)
            eval_result = detect_predict(detector, eval_features)
            eval_golds = [u.gold_label if u.gold_label in plan.known_labels else OPEN_LABEL
                          for u in eval_utts]
            detector_eval = confusion_views(list(eval_result.labels), eval_golds)
            agree = sum(1 for p, g in zip(eval_result.labels, eval_golds) if p == g)
            event(step, f"eval-split agreement (K+1 view): {agree}/{len(eval_golds)}")

        clusters = None
        assignment = None
        k = None
        seed_rows: list[int] = []
        seed_labels: list[str] = []
        roles: dict[int, str] = {}
        if config.task in ("pipeline", "discover"):
            step = "assemble_discovery"
            boundary(step)
            for r, g in zip(labeled_rows, labeled_golds):
                roles[r] = "labeled"
                seed_rows.append(r)
                seed_labels.append(g)
            n_pred_known = n_open = 0
            if config.task == "pipeline":
                pool_features = train_features.subset(plan.unlabeled_ids)
                pool_result = detect_predict(detector, pool_features)
                for r, pred in zip(unlabeled_rows, pool_result.labels):
                    if pred == OPEN_LABEL:
                        roles[r] = "detected-open"
                        n_open += 1
                    else:
                        # predicted labels seed centers but never count as gold
                        roles[r] = "predicted-known"
                        seed_rows.append(r)
                        seed_labels.append(pred)
                        n_pred_known += 1
            else:
                for r in unlabeled_rows:
                    roles[r] = "unlabeled"

            k = config.k if config.k is not None else len(dataset.label_set)
            if config.use_estimate_k and config.task == "pipeline":
                open_rows = [r for r in unlabeled_rows if roles[r] == "detected-open"]
                if open_rows:
                    k_max = config.k_max or max(2, min(2 * len(dataset.label_set),
                                                       len(open_rows)))
                    k_open = estimate_k(train_features.values[open_rows], k_max,
                                        config.drop_fraction, config.seed)
                    k = len(plan.known_labels) + k_open
                else:
                    k = max(1, len(plan.known_labels))
            event(step, f"discovery pool: {train_features.n} utterances "
                        f"({len(labeled_rows)} labeled, {n_pred_known} predicted-known, "
                        f"{n_open} detected-open); k={k}")

            step = "train_discovery"
            boundary(step)
            clusters, assignment = fit_discovery(
                config.discover, train_features, k, config.seed,
                seed_rows, seed_labels, _discover_params(config))
            inertia = "n/a" if assignment.inertia is None else f"{assignment.inertia:.6g}"
            event(step, f"{config.discover}: k={k}, sizes={list(assignment.sizes)}, "
                        f"inertia={inertia}")

        keyword_recs: dict[int, KeywordRecommendation] = {}
        cluster_open: dict[int, bool] = {}
        if assignment is not None:
            step = "keywords"
            boundary(step)
            if getattr(featurizer, "supports_text_embedding", False):
                kw_featurizer = featurizer
            else:
                # embedding files cannot embed free text; score keywords with
                # a tf-idf model fitted on the discovery pool instead
                kw_featurizer = TfidfFeaturizer.fit([u.text for u in train_utts],
                                                    max_features=config.max_features)
            stopwords = load_stopwords()
            ids = assignment.cluster_ids
            for cid in range(k):
                member_rows = np.flatnonzero(ids == cid)
                texts = [train_utts[r].text for r in member_rows]
                open_members = sum(1 for r in member_rows
                                   if roles.get(int(r)) == "detected-open")
                cluster_open[cid] = bool(member_rows.size) and \
                    open_members * 2 > member_rows.size
                keyword_recs[cid] = recommend_keywords(
                    cid, texts, kw_featurizer,
                    (config.ngram_min, config.ngram_max), stopwords,
                    config.keyword_level) if texts else KeywordRecommendation(cid, ())
            n_open_clusters = sum(1 for v in cluster_open.values() if v)
            event(step, f"keywords for {k} clusters ({n_open_clusters} open)")
    except PipelineCancelled as exc:
        record.transition("failed", error="cancelled")
        event(exc.step, "run cancelled at step boundary")
        raise
    except Exception as exc:
        record.transition("failed", error=f"{step}: {exc}")
        event(step, f"failed: {exc}")
        raise

    trained = TrainedPipeline(config, dataset.name, plan, featurizer, detector,
                              clusters, keyword_recs, cluster_open, detector_eval, k)
    record.transition("finished")
    return trained, record


def predict_pipeline(trained: TrainedPipeline, utterances) -> list[PipelinePrediction]:
    """Route utterances: known intents keep their label, open ones land in
    the nearest discovered cluster with its keyword recommendation."""
    utterances = list(utterances)
    if not utterances:
        return []
    features = trained.featurizer.transform(utterances)
    out: list[PipelinePrediction] = []
    if trained.detector is not None:
        result = detect_predict(trained.detector, features)
        routed_open = [i for i, l in enumerate(result.labels) if l == OPEN_LABEL]
    else:
        result = None
        routed_open = list(range(len(utterances)))

    cluster_of: dict[int, int] = {}
    if routed_open and trained.clusters is not None:
        sub = FeatureMatrix(features.values[routed_open],
                            tuple(features.row_ids[i] for i in routed_open),
                            dict(features.meta))
        assigned = trained.clusters.assign(sub)
        cluster_of = {row: int(c) for row, c in zip(routed_open, assigned)}

    for i, utt in enumerate(utterances):
        conf = float(result.scores[i]) if result is not None else 1.0
        if result is not None and result.labels[i] != OPEN_LABEL:
            out.append(PipelinePrediction(utt.id, "known", conf, label=result.labels[i]))
        else:
            cid = cluster_of.get(i)
            rec = trained.keyword_recs.get(cid) if cid is not None else None
            out.append(PipelinePrediction(utt.id, "open", conf, cluster_id=cid,
                                          keywords=rec.items if rec else None))
    return out


def evaluate_pipeline(trained: TrainedPipeline, dataset: Dataset,
                      split: str = "test") -> MetricsReport:
    """Score a trained pipeline on a full split: accuracy over gold-known
    utterances, NMI over gold-open ones, plus the confusion breakdown."""
    utts = dataset.splits[split]
    features = trained.featurizer.transform(utts)
    known = set(trained.plan.known_labels)
    golds_k1 = [u.gold_label if u.gold_label in known else OPEN_LABEL for u in utts]
    context = {"dataset": dataset.name, "split": split,
               "task": trained.config.task, "detect": trained.config.detect,
               "discover": trained.config.discover, "kir": trained.config.kir,
               "lr": trained.config.lr, "seed": trained.config.seed,
               "k": trained.k}

    if trained.detector is None:
        # discovery-only run: cluster the whole split against the gold labels
        assigned = trained.clusters.assign(features)
        value = nmi([int(c) for c in assigned], [u.gold_label for u in utts])
        return MetricsReport(0.0, value, {}, {"labels": [], "matrix": []},
                             context=context)

    result = detect_predict(trained.detector, features)
    open_rows = [i for i, g in enumerate(golds_k1) if g == OPEN_LABEL]
    routed_open = [i for i in open_rows if result.labels[i] == OPEN_LABEL]
    cluster_of: dict[int, int] = {}
    if routed_open and trained.clusters is not None:
        assigned = trained.clusters.assign(
            FeatureMatrix(features.values[routed_open],
                          tuple(features.row_ids[i] for i in routed_open),
                          dict(features.meta)))
        cluster_of = {row: int(c) for row, c in zip(routed_open, assigned)}

    group_pred = []
    group_gold = []
    for i in open_rows:
        if result.labels[i] == OPEN_LABEL:
            cid = cluster_of.get(i)
            group_pred.append(f"cluster:{cid}" if cid is not None else "open")
        else:
            group_pred.append(f"known:{result.labels[i]}")
        group_gold.append(utts[i].gold_label)

    return compute_metrics_report(list(result.labels), golds_k1, group_pred,
                                  group_gold, context)


def load_pipeline(path) -> TrainedPipeline:
    return TrainedPipeline.load(path)
