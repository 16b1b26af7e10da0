"""Shared corpus builders for the test suite."""

import numpy as np
import pytest

# Four intent classes with disjoint vocabularies, so tf-idf features
# separate them and small training budgets converge.
CLASS_TEXTS = {
    "balance": ["check my account balance", "how much money do i have",
                "show balance on my savings account", "what is my current balance",
                "account balance please", "balance of my checking account"],
    "transfer": ["transfer money to my friend", "send funds to another account",
                 "wire money abroad", "move cash between accounts",
                 "transfer fifty dollars to savings", "send a payment to john"],
    "weather": ["what is the weather today", "will it rain tomorrow",
                "weather forecast for boston", "is it sunny outside",
                "temperature for this afternoon", "do i need an umbrella"],
    "music": ["play some jazz music", "put on my favorite playlist",
              "play the next song", "turn up the music volume",
              "play relaxing piano tracks", "skip this track"],
}


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("text\tlabel\n")
        for text, label in rows:
            fh.write(f"{text}\t{label}\n")


def build_text_dataset(root, n_train=10, n_eval=4, n_test=4, classes=None):
    """Write a train/eval/test TSV directory; returns its path."""
    root.mkdir(parents=True, exist_ok=True)
    chosen = classes or list(CLASS_TEXTS)
    for split, n in (("train", n_train), ("eval", n_eval), ("test", n_test)):
        rows = []
        for label in chosen:
            seeds = CLASS_TEXTS[label]
            for i in range(n):
                rows.append((f"{seeds[i % len(seeds)]} {split}{i}", label))
        write_tsv(root / f"{split}.tsv", rows)
    return root


def build_blob_dataset(root, n_classes=8, dim=32, per_split=(120, 40, 40),
                       separation=8.0, seed=123):
    """Gaussian blobs carried through the text pipeline as precomputed
    embeddings; returns (dataset_dir, vector_file)."""
    ds = root / "blobs"
    ds.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_classes, dim))
    for i in range(n_classes):
        centers[i, i % dim] = separation  # pairwise distance separation*sqrt(2)

    vec_lines = [f"dim={dim}"]
    counters = {s: 0 for s in ("train", "eval", "test")}
    rows = {s: [] for s in counters}
    for k in range(n_classes):
        total = sum(per_split)
        draws = centers[k] + rng.normal(size=(total, dim))
        at = 0
        for split, n in zip(("train", "eval", "test"), per_split):
            for _ in range(n):
                counters[split] += 1
                uid = f"{split}-{counters[split]}"
                rows[split].append((f"utterance {uid}", f"intent_{k}"))
                vec = " ".join(f"{v:.6f}" for v in draws[at])
                vec_lines.append(f"{uid}\t{vec}")
                at += 1
    for split in counters:
        write_tsv(ds / f"{split}.tsv", rows[split])
    vec_path = root / "vectors.tsv"
    vec_path.write_text("\n".join(vec_lines) + "\n", encoding="utf-8")
    return ds, vec_path


@pytest.fixture
def text_dataset_dir(tmp_path):
    return build_text_dataset(tmp_path / "toy")


@pytest.fixture
def loaded_text_dataset(text_dataset_dir):
    from intentlab import load_dataset
    return load_dataset(text_dataset_dir, "tsv")
