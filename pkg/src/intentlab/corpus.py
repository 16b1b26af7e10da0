"""Benchmark-format intent datasets: loading, statistics, and the sampling
that splits classes into known/open and training data into labeled/unlabeled.

Two on-disk formats are supported, both one utterance per record:

* TSV: ``train.tsv``, ``eval.tsv``, ``test.tsv`` in a directory, each with a
  required ``text<TAB>label`` header line.
* JSONL: same three files with a ``.jsonl`` suffix, one object per line with
  keys ``text``, ``label`` and an optional ``id`` (auto-assigned
  ``<split>-<row>`` when absent, 1-based data rows, same rule as TSV).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .utils import canonical_json, rng_for, round_half_up

SPLITS = ("train", "eval", "test")
FORMATS = ("tsv", "jsonl")

#: Label assigned to utterances outside the known classes.
OPEN_LABEL = "<open>"


@dataclass(frozen=True)
class Utterance:
    """One user utterance with an optional gold intent label."""

    id: str
    text: str
    gold_label: str | None = None


@dataclass
class Dataset:
    """A named corpus with train/eval/test splits and its sorted label set."""

    name: str
    label_set: tuple[str, ...]
    splits: dict[str, tuple[Utterance, ...]]

    def split(self, name: str) -> tuple[Utterance, ...]:
        return self.splits[name]

    @property
    def n_labels(self) -> int:
        return len(self.label_set)


@dataclass(frozen=True)
class SamplingPlan:
    """Known/open class split plus labeled/unlabeled training pools.

    ``labeled_ids`` covers only known-class train utterances; everything else
    in the train split (including all open-class utterances) is unlabeled.
    """

    known_labels: tuple[str, ...]
    open_labels: tuple[str, ...]
    labeled_ids: tuple[str, ...]
    unlabeled_ids: tuple[str, ...]
    kir: float
    lr: float
    seed: int

    def to_jsonable(self) -> dict:
        return {
            "known_labels": list(self.known_labels),
            "open_labels": list(self.open_labels),
            "labeled_ids": list(self.labeled_ids),
            "unlabeled_ids": list(self.unlabeled_ids),
            "kir": self.kir,
            "lr": self.lr,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_jsonable())

    @classmethod
    def from_jsonable(cls, obj: dict) -> "SamplingPlan":
        return cls(
            known_labels=tuple(obj["known_labels"]),
            open_labels=tuple(obj["open_labels"]),
            labeled_ids=tuple(obj["labeled_ids"]),
            unlabeled_ids=tuple(obj["unlabeled_ids"]),
            kir=obj["kir"],
            lr=obj["lr"],
            seed=obj["seed"],
        )


def _parse_tsv(path: Path, split: str) -> list[Utterance]:
    utterances = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != "text\tlabel":
            raise ValueError(f"{path}: missing 'text<TAB>label' header line")
        for row, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: expected 2 tab-separated fields at data row {row}")
            text, label = parts[0].strip(), parts[1].strip()
            if not text:
                raise ValueError(f"{path}: empty text at data row {row}")
            if not label:
                raise ValueError(f"{path}: empty label at data row {row}")
            utterances.append(Utterance(id=f"{split}-{row}", text=text, gold_label=label))
    return utterances


def _parse_jsonl(path: Path, split: str) -> list[Utterance]:
    utterances = []
    with open(path, encoding="utf-8") as fh:
        for row, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON at line {row}: {exc}") from exc
            if "text" not in obj or "label" not in obj:
                raise ValueError(f"{path}: missing 'text' or 'label' key at line {row}")
            text = str(obj["text"]).strip()
            label = str(obj["label"]).strip()
            if not text:
                raise ValueError(f"{path}: empty text at line {row}")
            if not label:
                raise ValueError(f"{path}: empty label at line {row}")
            uid = str(obj["id"]) if "id" in obj and obj["id"] is not None else f"{split}-{row}"
            utterances.append(Utterance(id=uid, text=text, gold_label=label))
    return utterances


def load_dataset(path, format: str = "tsv", name: str | None = None) -> Dataset:
    """Load a dataset directory containing train/eval/test split files.

    Raises ValueError on a missing split file, duplicate utterance id,
    empty text, or an unknown format token.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format token {format!r}; expected one of {FORMATS}")
    root = Path(path)
    if not root.is_dir():
        raise ValueError(f"dataset directory does not exist: {root}")

    suffix = "tsv" if format == "tsv" else "jsonl"
    for split in SPLITS:
        if not (root / f"{split}.{suffix}").is_file():
            raise ValueError(f"missing split: {split}")

    splits: dict[str, tuple[Utterance, ...]] = {}
    seen_ids: set[str] = set()
    labels: set[str] = set()
    for split in SPLITS:
        file = root / f"{split}.{suffix}"
        parsed = _parse_tsv(file, split) if format == "tsv" else _parse_jsonl(file, split)
        if not parsed:
            raise ValueError(f"{file}: split {split!r} is empty")
        for utt in parsed:
            if utt.id in seen_ids:
                raise ValueError(f"duplicate id: {utt.id}")
            seen_ids.add(utt.id)
            labels.add(utt.gold_label)
        splits[split] = tuple(parsed)

    return Dataset(name=name or root.name, label_set=tuple(sorted(labels)), splits=splits)


def _quantiles(values: list[int]) -> dict:
    arr = np.asarray(values, dtype=float)
    pts = np.percentile(arr, [0, 25, 50, 75, 100])
    return {"min": float(pts[0]), "p25": float(pts[1]), "p50": float(pts[2]),
            "p75": float(pts[3]), "max": float(pts[4])}


def dataset_stats(dataset: Dataset) -> dict:
    """Per-split counts, per-label counts, and text-length quantiles."""
    out: dict = {"name": dataset.name, "n_labels": dataset.n_labels,
                 "labels": list(dataset.label_set), "splits": {}}
    for split in SPLITS:
        utts = dataset.splits[split]
        per_label: dict[str, int] = {}
        for u in utts:
            per_label[u.gold_label] = per_label.get(u.gold_label, 0) + 1
        out["splits"][split] = {
            "count": len(utts),
            "per_label": {k: per_label[k] for k in sorted(per_label)},
            "text_chars": _quantiles([len(u.text) for u in utts]),
            "text_tokens": _quantiles([len(u.text.split()) for u in utts]),
        }
    return out


def make_sampling_plan(dataset: Dataset, kir: float, lr: float, seed: int) -> SamplingPlan:
    """Pick known classes and the per-class labeled subset of the train split.

    Known classes are a uniform seeded choice of ``max(1, round(kir * L))``
    labels. Labeled utterances are a per-class shuffled prefix of size
    ``max(1, round(lr * n_class))``, so for a fixed seed the labeled set grows
    monotonically with ``lr``. Rounding is half-up.
    """
    if not (0.0 < kir <= 1.0):
        raise ValueError(f"kir out of range (0, 1]: {kir}")
    if not (0.0 < lr <= 1.0):
        raise ValueError(f"lr out of range (0, 1]: {lr}")

    labels = dataset.label_set
    n_known = max(1, round_half_up(kir * len(labels)))
    order = rng_for(seed, "known-classes").permutation(len(labels))
    known = tuple(sorted(labels[i] for i in order[:n_known]))
    open_ = tuple(sorted(set(labels) - set(known)))

    train = dataset.splits["train"]
    by_class: dict[str, list[str]] = {}
    for u in train:
        by_class.setdefault(u.gold_label, []).append(u.id)

    labeled: set[str] = set()
    for cls in known:
        ids = by_class.get(cls, [])
        if not ids:
            continue
        count = max(1, round_half_up(lr * len(ids)))
        # per-class stream independent of lr and of the other classes
        order = rng_for(seed, "labeled", cls).permutation(len(ids))
        labeled.update(ids[i] for i in order[:count])

    all_train = [u.id for u in train]
    unlabeled = tuple(sorted(set(all_train) - labeled))
    return SamplingPlan(
        known_labels=known,
        open_labels=open_,
        labeled_ids=tuple(sorted(labeled)),
        unlabeled_ids=unlabeled,
        kir=kir,
        lr=lr,
        seed=seed,
    )


def utterances_by_id(dataset: Dataset, split: str | None = None) -> dict[str, Utterance]:
    index = {}
    for name in SPLITS if split is None else (split,):
        for u in dataset.splits[name]:
            index[u.id] = u
    return index
