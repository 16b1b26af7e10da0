"""Keyword recommendation for discovered intent clusters.

Candidate phrases are n-grams drawn from stopword-bounded token runs; each
candidate is scored by cosine similarity between its embedding and the
cluster centroid (mean sentence embedding), or against individual sentences
with max-aggregation in sentence-level mode. The top 3 survive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .featurize import tokenize


@dataclass(frozen=True)
class KeywordRecommendation:
    """Ranked keywords for one cluster; confidences are raw cosines."""

    cluster_id: int
    items: tuple[tuple[str, float], ...]
    level: str = "cluster"

    def __post_init__(self):
        if self.level not in ("sentence", "cluster"):
            raise ValueError(f"unknown keyword level: {self.level!r}")
        confs = [c for _, c in self.items]
        if any(confs[i] < confs[i + 1] for i in range(len(confs) - 1)):
            raise ValueError("keyword confidences must be non-increasing")
        names = [k for k, _ in self.items]
        if len(set(names)) != len(names):
            raise ValueError("keywords must be distinct")

    def to_jsonable(self) -> dict:
        return {"cluster_id": self.cluster_id, "level": self.level,
                "keywords": [{"keyword": k, "confidence": c} for k, c in self.items]}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "KeywordRecommendation":
        return cls(obj["cluster_id"],
                   tuple((e["keyword"], e["confidence"]) for e in obj["keywords"]),
                   obj.get("level", "cluster"))


def load_stopwords(path=None) -> frozenset[str]:
    """One token per line, UTF-8; defaults to the bundled English list."""
    if path is None:
        text = resources.files("intentlab").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(t.strip() for t in text.splitlines() if t.strip())


def extract_candidates(texts, ngram_range: tuple[int, int] = (1, 2),
                       stopwords=frozenset()) -> list[str]:
    """Distinct n-grams from stopword-bounded runs, in first-seen order.

    A stopword ends the current run; n-grams never skip over one.
    """
    lo, hi = ngram_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad ngram range: {ngram_range}")
    seen = {}
    for text in texts:
        run: list[str] = []
        for tok in tokenize(text) + [None]:
            if tok is None or tok in stopwords:
                for n in range(lo, hi + 1):
                    for start in range(len(run) - n + 1):
                        seen.setdefault(" ".join(run[start:start + n]), None)
                run = []
            else:
                run.append(tok)
    return list(seen)


def _cosine_rows(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(vec)
    out = np.zeros(mat.shape[0])
    ok = norms > 0
    out[ok] = (mat @ vec)[ok] / norms[ok]
    return out


def score_keywords(candidates, cluster_texts, featurizer, cluster_id: int = 0,
                   level: str = "cluster", top_n: int = 3) -> KeywordRecommendation:
    """Rank candidates by cosine against the cluster centroid (or per
    sentence, aggregated by max); ties break shorter-then-lexicographic."""
    candidates = list(candidates)
    if not candidates:
        return KeywordRecommendation(cluster_id, (), level)
    sent = featurizer.embed_texts(list(cluster_texts))
    cand = featurizer.embed_texts(candidates)

    cand_norms = np.linalg.norm(cand, axis=1)
    keep = cand_norms > 0
    if not np.all(keep):
        dropped = [candidates[i] for i in np.flatnonzero(~keep)]
        warnings.warn(f"skipped {len(dropped)} zero-embedding candidate(s)")

    if level == "cluster":
        centroid = sent.mean(axis=0)
        if np.linalg.norm(centroid) == 0:
            warnings.warn("cluster centroid has zero norm; no keywords scored")
            return KeywordRecommendation(cluster_id, (), level)
        scores = _cosine_rows(cand, centroid)
    elif level == "sentence":
        sent_norms = np.linalg.norm(sent, axis=1)
        cn = np.maximum(cand_norms, 1e-300)
        sn = np.maximum(sent_norms, 1e-300)
        cos = (cand @ sent.T) / cn[:, None] / sn[None, :]
        cos[:, sent_norms == 0] = -np.inf
        scores = cos.max(axis=1)
        if np.all(~np.isfinite(scores)):
            warnings.warn("all sentence embeddings have zero norm; no keywords scored")
            return KeywordRecommendation(cluster_id, (), level)
    else:
        raise ValueError(f"unknown keyword level: {level!r}")

    ranked = sorted((i for i in range(len(candidates)) if keep[i]),
                    key=lambda i: (-scores[i], len(candidates[i]), candidates[i]))
    items = tuple((candidates[i], float(scores[i])) for i in ranked[:top_n])
    return KeywordRecommendation(cluster_id, items, level)


def recommend_keywords(cluster_id: int, texts, featurizer,
                       ngram_range: tuple[int, int] = (1, 2), stopwords=None,
                       level: str = "cluster") -> KeywordRecommendation:
    """Candidate extraction plus scoring for one cluster's texts."""
    if stopwords is None:
        stopwords = load_stopwords()
    candidates = extract_candidates(texts, ngram_range, stopwords)
    return score_keywords(candidates, texts, featurizer, cluster_id, level)
