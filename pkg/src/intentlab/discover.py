"""Open intent discovery: cluster utterances into fine-grained intents.

Unsupervised (k-means, agglomerative) and semi-supervised (labeled-mean
seeded k-means, alignment-trained encoder clustering) methods share one
model type. The alignment trainer re-clusters encoder outputs each epoch
and maps the new cluster ids onto the previous epoch's via an optimal
assignment, so pseudo-labels stay stable enough to train against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .featurize import (ClassifierHead, FeatureMatrix, MlpEncoder,
                        ce_loss_and_grads, rng_for)
from .utils import atomic_write_text, canonical_json

DISCOVER_METHODS = ("kmeans", "agglomerative", "semi_seeded", "deep_aligned")
# catalog names accepted by configs but backed by no implementation yet
PLACEHOLDER_METHODS = ("sae_km", "dec", "dcn", "kcl", "mcl", "dtc", "cdac_plus")

LINKAGES = ("average", "complete", "ward")
AGGLOMERATIVE_MAX_N = 2000

MODEL_FORMAT = "intentlab-clusters"
MODEL_VERSION = 1


@dataclass
class ClusterAssignment:
    """Cluster id per input row plus bookkeeping aggregates."""

    cluster_ids: np.ndarray
    k: int
    inertia: float | None = None
    sizes: tuple[int, ...] = ()

    def __post_init__(self):
        self.cluster_ids = np.asarray(self.cluster_ids, dtype=np.int64)
        if not self.sizes:
            self.sizes = tuple(int((self.cluster_ids == c).sum()) for c in range(self.k))
        if sum(self.sizes) != self.cluster_ids.shape[0]:
            raise ValueError("cluster sizes do not sum to n")
        if self.cluster_ids.size and self.cluster_ids.max() >= self.k:
            raise ValueError("cluster id out of range")


@dataclass
class ClusterModel:
    """Fitted discovery model; centers live in the space used at fit time
    (raw features, or encoder outputs for the alignment trainer)."""

    method: str
    k: int
    centers: np.ndarray | None = None
    linkage: str | None = None
    encoder: MlpEncoder | None = None
    seed: int = 0
    featurizer_fingerprint: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"cluster count must be >= 1: {self.k}")
        if self.centers is not None:
            self.centers = np.asarray(self.centers, dtype=np.float64)
            if not np.all(np.isfinite(self.centers)):
                raise ValueError("centers must be finite")

    def assign(self, features) -> np.ndarray:
        """Nearest-center assignment for new points."""
        if self.centers is None:
            raise ValueError("model has no centers to assign against")
        x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
        if self.encoder is not None:
            x = self.encoder.forward(x)
        return np.argmin(_sq_dists(x, self.centers), axis=1)

    def to_jsonable(self) -> dict:
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION,
                "method": self.method, "k": self.k,
                "centers": None if self.centers is None else self.centers.tolist(),
                "linkage": self.linkage,
                "encoder": None if self.encoder is None else self.encoder.to_jsonable(),
                "seed": self.seed,
                "featurizer_fingerprint": self.featurizer_fingerprint,
                "meta": self.meta}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ClusterModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a cluster model file: {obj.get('format')!r}")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported cluster model version: {obj.get('version')!r}")
        centers = None if obj["centers"] is None else np.asarray(obj["centers"])
        encoder = None if obj.get("encoder") is None else MlpEncoder.from_jsonable(obj["encoder"])
        return cls(obj["method"], obj["k"], centers, obj.get("linkage"), encoder,
                   obj.get("seed", 0), obj.get("featurizer_fingerprint"), obj.get("meta", {}))


def save_clusters(model: ClusterModel, path) -> None:
    atomic_write_text(path, canonical_json(model.to_jsonable()))


def load_clusters(path) -> ClusterModel:
    import json

    with open(path, encoding="utf-8") as fh:
        return ClusterModel.from_jsonable(json.load(fh))


def _values(features) -> np.ndarray:
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    return x


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * (x @ centers.T)
    return np.maximum(d, 0.0)


# ---------------------------------------------------------------------------
# k-means (plain and seeded share one code path)

def _kmeanspp_extend(x: np.ndarray, centers: list[np.ndarray], n_new: int,
                     candidates: np.ndarray, rng) -> list[np.ndarray]:
    """Add n_new centers by distance-squared-weighted sampling over the
    candidate rows, continuing from any preset centers."""
    for _ in range(n_new):
        if not centers:
            centers.append(x[candidates[rng.integers(candidates.shape[0])]].copy())
            continue
        d2 = _sq_dists(x[candidates], np.stack(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            pick = candidates[rng.integers(candidates.shape[0])]
        else:
            pick = candidates[rng.choice(candidates.shape[0], p=d2 / total)]
        centers.append(x[pick].copy())
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int):
    """Lloyd iterations to an assignment fixpoint; returns
    (centers, assignment, inertia history). Empty clusters steal the
    farthest point from the largest cluster."""
    k = centers.shape[0]
    n = x.shape[0]
    prev = None
    history = []
    for _ in range(max_iter):
        assign = np.argmin(_sq_dists(x, centers), axis=1)
        sizes = np.bincount(assign, minlength=k)
        for empty in np.flatnonzero(sizes == 0):
            donor = int(np.argmax(sizes))
            donor_rows = np.flatnonzero(assign == donor)
            far = donor_rows[int(np.argmax(
                _sq_dists(x[donor_rows], centers[donor][None, :])[:, 0]))]
            assign[far] = empty
            sizes = np.bincount(assign, minlength=k)
        for c in range(k):
            centers[c] = x[assign == c].mean(axis=0)
        history.append(float(_sq_dists(x, centers)[np.arange(n), assign].sum()))
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
    return centers, prev, history


def _kmeans_core(x: np.ndarray, k: int, seed: int, preset_centers: list[np.ndarray],
                 candidates: np.ndarray, max_iter: int):
    rng = rng_for(seed, "kmeans")
    centers = _kmeanspp_extend(x, [c.copy() for c in preset_centers],
                               k - len(preset_centers), candidates, rng)
    centers, assign, history = _lloyd(x, np.stack(centers), max_iter)
    inertia = history[-1]
    return centers, assign, inertia, history


def kmeans(features, k: int, seed: int = 0, max_iter: int = 100):
    """k-means++ initialization plus Lloyd iterations."""
    x = _values(features)
    if k < 1 or k > x.shape[0]:
        raise ValueError(f"k must be in [1, n={x.shape[0]}]: {k}")
    centers, assign, inertia, history = _kmeans_core(
        x, k, seed, [], np.arange(x.shape[0]), max_iter)
    fp = features.meta.get("featurizer_fingerprint") if isinstance(features, FeatureMatrix) else None
    model = ClusterModel("kmeans", k, centers, seed=seed, featurizer_fingerprint=fp,
                         meta={"inertia_history": history})
    return model, ClusterAssignment(assign, k, inertia)


def semi_seeded_kmeans(features, labeled_rows, labeled_labels, k_total: int,
                       seed: int = 0, max_iter: int = 100):
    """k-means with one preset center per labeled class (at its labeled
    mean); remaining centers are k-means++ picks over unlabeled rows only.
    Seeding is the only supervision: labeled points move freely afterward.
    """
    x = _values(features)
    labeled_rows = np.asarray(list(labeled_rows), dtype=np.int64)
    labeled_labels = list(labeled_labels)
    if labeled_rows.shape[0] != len(labeled_labels):
        raise ValueError("labeled rows and labels differ in length")
    classes = sorted(set(labeled_labels))
    if k_total < len(classes):
        raise ValueError(
            f"k_total ({k_total}) must be >= number of labeled classes ({len(classes)})")
    if k_total > x.shape[0]:
        raise ValueError(f"k must be in [1, n={x.shape[0]}]: {k_total}")
    preset = []
    for cls in classes:
        rows = labeled_rows[np.asarray([l == cls for l in labeled_labels])]
        preset.append(x[rows].mean(axis=0))
    unlabeled = np.setdiff1d(np.arange(x.shape[0]), labeled_rows)
    candidates = unlabeled if unlabeled.shape[0] else np.arange(x.shape[0])
    centers, assign, inertia, history = _kmeans_core(x, k_total, seed, preset,
                                                     candidates, max_iter)
    fp = features.meta.get("featurizer_fingerprint") if isinstance(features, FeatureMatrix) else None
    model = ClusterModel("semi_seeded", k_total, centers, seed=seed,
                         featurizer_fingerprint=fp,
                         meta={"inertia_history": history,
                               "seeded_classes": classes})
    return model, ClusterAssignment(assign, k_total, inertia)


# ---------------------------------------------------------------------------
# agglomerative (Lance-Williams updates)

def agglomerative(features, k: int, linkage: str = "average") -> ClusterAssignment:
    """Bottom-up merging to k clusters; ties pick the lowest-index pair.

    average/complete operate on Euclidean distances, ward on squared
    Euclidean. Quadratic memory, hence the size guard.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage: {linkage!r} (choose from {LINKAGES})")
    x = _values(features)
    n = x.shape[0]
    if n > AGGLOMERATIVE_MAX_N:
        raise ValueError(
            f"agglomerative clustering is quadratic and capped at {AGGLOMERATIVE_MAX_N} "
            f"points (got {n}); use kmeans for larger inputs")
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, n={n}]: {k}")

    d = _sq_dists(x, x)
    if linkage != "ward":
        d = np.sqrt(d)
    np.fill_diagonal(d, np.inf)
    active = list(range(n))
    sizes = {i: 1 for i in active}
    members: dict[int, list[int]] = {i: [i] for i in active}

    while len(active) > k:
        # symmetric matrix: row-major argmin lands on the lowest-index pair
        i, j = (int(v) for v in np.unravel_index(int(np.argmin(d)), d.shape))
        if i > j:
            i, j = j, i
        ni, nj = sizes[i], sizes[j]
        for m in active:
            if m in (i, j):
                continue
            if linkage == "average":
                new = (ni * d[i, m] + nj * d[j, m]) / (ni + nj)
            elif linkage == "complete":
                new = max(d[i, m], d[j, m])
            else:
                nm = sizes[m]
                new = ((ni + nm) * d[i, m] + (nj + nm) * d[j, m] - nm * d[i, j]) / (ni + nj + nm)
            d[i, m] = d[m, i] = new
        sizes[i] = ni + nj
        members[i].extend(members.pop(j))
        del sizes[j]
        active.remove(j)
        d[j, :] = np.inf
        d[:, j] = np.inf

    # relabel clusters 0..k-1 by smallest member row
    order = sorted(active, key=lambda c: min(members[c]))
    assign = np.empty(n, dtype=np.int64)
    for new_id, c in enumerate(order):
        assign[np.asarray(members[c])] = new_id
    return ClusterAssignment(assign, k)


def agglomerative_model(features, k: int, linkage: str = "average"):
    """Agglomerative clustering plus post-hoc mean centers so the result can
    assign new points like the center-based methods."""
    assignment = agglomerative(features, k, linkage)
    x = _values(features)
    centers = np.stack([x[assignment.cluster_ids == c].mean(axis=0) for c in range(k)])
    fp = features.meta.get("featurizer_fingerprint") if isinstance(features, FeatureMatrix) else None
    model = ClusterModel("agglomerative", k, centers, linkage=linkage,
                         featurizer_fingerprint=fp)
    return model, assignment


# ---------------------------------------------------------------------------
# optimal assignment

def hungarian(cost) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching on a square matrix via the potentials
    method; returns (column index per row, total cost)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if np.isnan(cost).any():
        raise ValueError("cost matrix contains NaN")
    n = cost.shape[0]
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)   # match[j] = row assigned to column j (1-based)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assign = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        assign[match[j] - 1] = j - 1
    total = float(cost[np.arange(n), assign].sum())
    return assign, total


def align_to_previous(current_centers: np.ndarray, previous_centers: np.ndarray) -> np.ndarray:
    """Map current cluster ids onto the previous epoch's ids by minimizing
    total squared center distance; returns sigma with sigma[cur] = prev."""
    cost = _sq_dists(current_centers, previous_centers)
    sigma, _ = hungarian(cost)
    return sigma


# ---------------------------------------------------------------------------
# alignment-trained encoder clustering

def deep_aligned_train(features, labeled_rows=(), labeled_labels=(), k: int = 2,
                       epochs: int = 10, seed: int = 0, hidden: int = 128,
                       repr_dim: int = 64, learning_rate: float = 0.05,
                       batch_size: int = 32, max_iter: int = 100):
    """Iterate: encode, cluster, align cluster ids to the previous epoch via
    optimal assignment, train the encoder one pass against the aligned
    pseudo-labels. Reports the pseudo-label flip rate of the final epoch.

    epochs = 0 degenerates to clustering the raw features directly.
    """
    x = _values(features)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, n={n}]: {k}")
    labeled_rows = list(labeled_rows)
    labeled_labels = list(labeled_labels)

    def cluster(space_features):
        if labeled_rows:
            return semi_seeded_kmeans(space_features, labeled_rows, labeled_labels,
                                      k, seed, max_iter)
        return kmeans(space_features, k, seed, max_iter)

    fp = features.meta.get("featurizer_fingerprint") if isinstance(features, FeatureMatrix) else None
    if epochs == 0:
        model, assignment = cluster(features)
        model = ClusterModel("deep_aligned", k, model.centers, seed=seed,
                             featurizer_fingerprint=fp,
                             meta={"epochs": 0, "flip_rate": 0.0})
        return model, assignment

    encoder = MlpEncoder.init([x.shape[1], hidden, repr_dim], seed)
    rng = rng_for(seed, "deep-aligned-head")
    bound = np.sqrt(6.0 / (repr_dim + k))
    head = ClassifierHead(encoder, rng.uniform(-bound, bound, (repr_dim, k)),
                          np.zeros(k), tuple(str(c) for c in range(k)))
    shuffle_rng = rng_for(seed, "deep-aligned-shuffle")

    prev_centers = None
    prev_labels = None
    flip_rate = 0.0
    for epoch in range(epochs):
        encoded = encoder.forward(x)
        _, assignment = cluster(encoded)
        ids = assignment.cluster_ids
        centers = np.stack([encoded[ids == c].mean(axis=0) for c in range(k)])
        if prev_centers is not None:
            sigma = align_to_previous(centers, prev_centers)
            ids = sigma[ids]
            aligned = np.empty_like(centers)
            aligned[sigma] = centers
            centers = aligned
        if prev_labels is not None:
            flip_rate = float((ids != prev_labels).mean())
        prev_centers = centers
        prev_labels = ids

        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            value, grad = ce_loss_and_grads(head, x[batch], ids[batch])
            if not np.isfinite(value):
                raise RuntimeError(f"NaN alignment loss at epoch {epoch}")
            head.set_flat_params(head.get_flat_params() - learning_rate * grad)

    encoded = encoder.forward(x)
    _, assignment = cluster(encoded)
    ids = assignment.cluster_ids
    centers = np.stack([encoded[ids == c].mean(axis=0) for c in range(k)])
    sigma = align_to_previous(centers, prev_centers)
    ids = sigma[ids]
    aligned = np.empty_like(centers)
    aligned[sigma] = centers
    flip_rate = float((ids != prev_labels).mean())

    model = ClusterModel("deep_aligned", k, aligned, encoder=encoder, seed=seed,
                         featurizer_fingerprint=fp,
                         meta={"epochs": epochs, "flip_rate": flip_rate})
    inertia = float(_sq_dists(encoded, aligned)[np.arange(n), ids].sum())
    return model, ClusterAssignment(ids, k, inertia)


# ---------------------------------------------------------------------------
# cluster-count estimation

def estimate_k(features, k_max: int, drop_fraction: float = 0.5, seed: int = 0) -> int:
    """Cluster at k_max, drop clusters smaller than drop_fraction * (n/k_max),
    return the surviving count (at least 1)."""
    x = _values(features)
    if k_max > x.shape[0]:
        raise ValueError(f"k_max must be <= n ({x.shape[0]}): {k_max}")
    _, assignment = kmeans(x, k_max, seed)
    threshold = drop_fraction * (x.shape[0] / k_max)
    surviving = sum(1 for s in assignment.sizes if s >= threshold)
    return max(1, surviving)


# ---------------------------------------------------------------------------
# uniform fit entry point

def fit_discovery(method: str, features, k: int, seed: int = 0,
                  labeled_rows=(), labeled_labels=(), params: dict | None = None):
    params = dict(params or {})
    if method in PLACEHOLDER_METHODS:
        raise NotImplementedError(
            f"method registered but not implemented: {method} "
            "(see the plug-in guide in README.md)")
    if method == "kmeans":
        return kmeans(features, k, seed, params.get("max_iter", 100))
    if method == "agglomerative":
        return agglomerative_model(features, k, params.get("linkage", "average"))
    if method == "semi_seeded":
        return semi_seeded_kmeans(features, labeled_rows, labeled_labels, k, seed,
                                  params.get("max_iter", 100))
    if method == "deep_aligned":
        return deep_aligned_train(features, labeled_rows, labeled_labels, k,
                                  epochs=params.get("discover_epochs", 10), seed=seed,
                                  hidden=params.get("hidden", 128),
                                  repr_dim=params.get("repr_dim", 64),
                                  learning_rate=params.get("learning_rate", 0.05),
                                  batch_size=params.get("batch_size", 32))
    raise ValueError(f"unknown discovery method: {method!r}")
