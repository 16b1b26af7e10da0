"""Open intent detection: route each utterance to one of K known intents or
the ``<open>`` class.

Two families share one model type. Threshold-based methods (max-softmax,
one-vs-rest sigmoid with per-class Gaussian thresholds, Weibull logit
revision) reject by score; geometry-based methods (local outlier factor
over encoder features, learned per-class decision boundaries) reject by
position in representation space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import OPEN_LABEL
from .featurize import (ClassifierHead, FeatureMatrix, TrainConfig, sigmoid,
                        softmax, train_classifier)
from .utils import atomic_write_text, canonical_json, rng_for

DETECT_METHODS = ("msp", "doc", "openmax", "deepunk", "adb")

MODEL_FORMAT = "intentlab-detector"
MODEL_VERSION = 1


@dataclass
class DetectionResult:
    """Per-utterance routing decision plus a confidence in [0, 1].

    ``semantics`` names what the score means (softmax-max, max-sigmoid,
    openmax-prob, lof-negated, boundary-margin) so downstream views can
    label axes honestly instead of pretending scales are comparable.
    """

    labels: tuple[str, ...]
    scores: np.ndarray
    semantics: str

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.labels),):
            raise ValueError("scores length does not match labels")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("confidence scores must be finite")
        if np.any(self.scores < 0) or np.any(self.scores > 1):
            raise ValueError("confidence scores must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.labels)

    def open_mask(self) -> np.ndarray:
        return np.asarray([l == OPEN_LABEL for l in self.labels])


@dataclass
class DetectorModel:
    """Fitted detector: method tag, optional classifier head, parameters."""

    method: str
    labels: tuple[str, ...]
    params: dict
    head: ClassifierHead | None = None
    featurizer_fingerprint: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in DETECT_METHODS:
            raise ValueError(f"unknown detection method: {self.method!r}")
        self.labels = tuple(self.labels)

    def to_jsonable(self) -> dict:
        params = _jsonable_params(self.params)
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION,
                "method": self.method, "labels": list(self.labels),
                "params": params,
                "head": self.head.to_jsonable() if self.head else None,
                "featurizer_fingerprint": self.featurizer_fingerprint,
                "meta": self.meta}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "DetectorModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a detector model file: {obj.get('format')!r}")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported detector model version: {obj.get('version')!r}")
        head = ClassifierHead.from_jsonable(obj["head"]) if obj.get("head") else None
        return cls(obj["method"], tuple(obj["labels"]), _array_params(obj["params"]),
                   head, obj.get("featurizer_fingerprint"), obj.get("meta", {}))


_ARRAY_PARAMS = ("centers", "radii", "train_features")


def _jsonable_params(params: dict) -> dict:
    out = {}
    for key, val in params.items():
        if isinstance(val, np.ndarray):
            out[key] = val.tolist()
        elif key == "per_class":
            out[key] = {lbl: {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                              for k, v in spec.items()} for lbl, spec in val.items()}
        else:
            out[key] = val
    return out


def _array_params(params: dict) -> dict:
    out = dict(params)
    for key in _ARRAY_PARAMS:
        if key in out:
            out[key] = np.asarray(out[key], dtype=np.float64)
    if "per_class" in out:
        out["per_class"] = {lbl: {**spec, "mu": np.asarray(spec["mu"], dtype=np.float64)}
                            for lbl, spec in out["per_class"].items()}
    return out


def save_detector(model: DetectorModel, path) -> None:
    atomic_write_text(path, canonical_json(model.to_jsonable()))


def load_detector(path) -> DetectorModel:
    import json

    with open(path, encoding="utf-8") as fh:
        return DetectorModel.from_jsonable(json.load(fh))


def _feature_values(features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.values
    return np.asarray(features, dtype=np.float64)


def _check_fingerprint(model: DetectorModel, features) -> None:
    if model.featurizer_fingerprint is None or not isinstance(features, FeatureMatrix):
        return
    seen = features.meta.get("featurizer_fingerprint")
    if seen is not None and seen != model.featurizer_fingerprint:
        raise ValueError(
            "featurizer fingerprint mismatch: features were produced by a different "
            "featurizer than the one this model was trained with")


def _representation(model: DetectorModel, features) -> np.ndarray:
    x = _feature_values(features)
    if model.head is not None:
        return model.head.encoder.forward(x)
    return x


# ---------------------------------------------------------------------------
# MSP

def msp_fit(features: FeatureMatrix, labels, params: dict | None = None,
            train_config: TrainConfig | None = None) -> DetectorModel:
    params = dict(params or {})
    theta = float(params.get("threshold", 0.5))
    if not 0.0 < theta < 1.0:
        raise ValueError(f"threshold out of range (0, 1): {theta}")
    head = train_classifier(features, labels, train_config)
    return DetectorModel("msp", head.labels, {"threshold": theta}, head,
                         features.meta.get("featurizer_fingerprint"))


def msp_predict(head: ClassifierHead, features, theta: float) -> DetectionResult:
    if not 0.0 < theta < 1.0:
        raise ValueError(f"threshold out of range (0, 1): {theta}")
    probs = softmax(head.logits(_as_matrix(features, head)))
    best = np.argmax(probs, axis=1)
    conf = probs[np.arange(probs.shape[0]), best]
    labels = tuple(head.labels[j] if conf[i] >= theta else OPEN_LABEL
                   for i, j in enumerate(best))
    return DetectionResult(labels, conf, "softmax-max")


def _as_matrix(features, head: ClassifierHead) -> FeatureMatrix:
    if isinstance(features, FeatureMatrix):
        return features
    x = np.asarray(features, dtype=np.float64)
    return FeatureMatrix(x, tuple(f"q-{i}" for i in range(x.shape[0])))


# ---------------------------------------------------------------------------
# DOC

def doc_thresholds(scores: np.ndarray, y_idx: np.ndarray, n_classes: int,
                   alpha_doc: float) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Per-class thresholds from Gaussian fits to mirrored positive scores.

    Each positive score p contributes p and its mirror 2 - p, centering the
    sample at 1; t_i = max(0.5, 1 - alpha_doc * sigma_i). Classes with < 2
    positive examples fall back to t_i = 0.5.
    """
    thresholds = np.empty(n_classes)
    sigmas = np.zeros(n_classes)
    fallback = []
    for i in range(n_classes):
        pos = scores[y_idx == i, i]
        if pos.shape[0] < 2:
            thresholds[i] = 0.5
            fallback.append(i)
            continue
        # mirrored sample {p} u {2-p} has mean exactly 1
        sigma = float(np.sqrt(np.mean((pos - 1.0) ** 2)))
        sigmas[i] = sigma
        thresholds[i] = max(0.5, 1.0 - alpha_doc * sigma)
    return thresholds, sigmas, fallback


def doc_fit(features: FeatureMatrix, labels, params: dict | None = None,
            train_config: TrainConfig | None = None) -> DetectorModel:
    params = dict(params or {})
    alpha_doc = float(params.get("alpha_doc", 3.0))
    head = train_classifier(features, labels, train_config, loss="sigmoid")
    scores = head.scores(features)
    class_index = {c: i for i, c in enumerate(head.labels)}
    y_idx = np.asarray([class_index[l] for l in labels])
    thresholds, sigmas, fallback = doc_thresholds(scores, y_idx, head.n_classes, alpha_doc)
    model_params = {"thresholds": {head.labels[i]: float(thresholds[i])
                                   for i in range(head.n_classes)},
                    "alpha_doc": alpha_doc}
    meta = {"sigma": {head.labels[i]: float(sigmas[i]) for i in range(head.n_classes)},
            "fallback_classes": [head.labels[i] for i in fallback]}
    return DetectorModel("doc", head.labels, model_params, head,
                         features.meta.get("featurizer_fingerprint"), meta)


def doc_predict(head: ClassifierHead, features, thresholds: dict[str, float]) -> DetectionResult:
    scores = head.scores(_as_matrix(features, head))
    best = np.argmax(scores, axis=1)
    conf = scores[np.arange(scores.shape[0]), best]
    t = np.asarray([thresholds[l] for l in head.labels])
    labels = tuple(head.labels[j] if conf[i] >= t[j] else OPEN_LABEL
                   for i, j in enumerate(best))
    return DetectionResult(labels, conf, "max-sigmoid")


# ---------------------------------------------------------------------------
# OpenMax

def fit_weibull_mle(x, max_iter: int = 200, tol: float = 1e-12) -> tuple[float, float]:
    """Two-parameter Weibull fit by Newton iteration on the profile shape
    equation; returns (shape, scale)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("weibull fit needs at least 2 values")
    if np.any(x <= 0):
        x = np.maximum(x, 1e-12)
    if np.ptp(x) == 0:
        raise ValueError("zero-variance tail")
    # work on x / max(x) so x**k cannot overflow; shape is scale-invariant
    top = float(x.max())
    xs = x / top
    logs = np.log(xs)
    mean_log = logs.mean()
    std_log = float(logs.std())
    k = 1.2825 / std_log if std_log > 0 else 1.0

    for _ in range(max_iter):
        xk = xs ** k
        s0 = xk.sum()
        s1 = (xk * logs).sum()
        s2 = (xk * logs ** 2).sum()
        g = s1 / s0 - 1.0 / k - mean_log
        gprime = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k)
        step = g / gprime
        k_next = k - step
        if k_next <= 0:
            k_next = k / 2.0
        if abs(k_next - k) < tol * max(k, 1.0):
            k = k_next
            break
        k = k_next
    else:
        raise RuntimeError("weibull MLE did not converge")
    scale = top * float(np.mean(xs ** k) ** (1.0 / k))
    return float(k), scale


def weibull_cdf(d, shape: float, scale: float, shift: float = 0.0):
    z = np.maximum(np.asarray(d, dtype=np.float64) - shift, 0.0) / scale
    return 1.0 - np.exp(-(z ** shape))


def openmax_fit(features: FeatureMatrix, labels, params: dict | None = None,
                train_config: TrainConfig | None = None) -> DetectorModel:
    params = dict(params or {})
    eta = int(params.get("tail_size", 20))
    head = train_classifier(features, labels, train_config)
    alpha = params.get("revision_rank")
    alpha = min(3, head.n_classes) if alpha is None else int(alpha)
    if alpha < 0 or alpha > head.n_classes:
        raise ValueError(f"revision rank out of range [0, K]: {alpha}")
    logits = head.logits(features)
    preds = np.argmax(logits, axis=1)
    class_index = {c: i for i, c in enumerate(head.labels)}
    y_idx = np.asarray([class_index[l] for l in labels])

    per_class = {}
    shrunk = {}
    for i, lbl in enumerate(head.labels):
        correct = logits[(y_idx == i) & (preds == i)]
        used_fallback = correct.shape[0] == 0
        pool = logits[y_idx == i] if used_fallback else correct
        mu = pool.mean(axis=0)
        dists = np.linalg.norm(logits[y_idx == i] - mu, axis=1)
        tail_n = min(eta, dists.shape[0])
        if tail_n < eta:
            shrunk[lbl] = tail_n
        tail = np.sort(dists)[-tail_n:]
        try:
            shape, scale = fit_weibull_mle(tail)
        except (ValueError, RuntimeError) as exc:
            raise RuntimeError(f"weibull fit failed for class {lbl}: {exc}") from exc
        per_class[lbl] = {"mu": mu, "shape": shape, "scale": scale,
                          "shift": 0.0, "tail_size": int(tail_n)}
        if used_fallback:
            shrunk.setdefault(lbl, tail_n)

    meta = {}
    if shrunk:
        meta["shrunk_tails"] = shrunk
    return DetectorModel("openmax", head.labels,
                         {"per_class": per_class, "revision_rank": alpha}, head,
                         features.meta.get("featurizer_fingerprint"), meta)


def openmax_scores(head: ClassifierHead, features, per_class: dict, alpha: int):
    """Revised (K+1)-way probabilities; column 0 is the open class.

    With alpha = 0 no logit is revised, no open logit exists, and the open
    column is exactly zero.
    """
    z = head.logits(_as_matrix(features, head))
    n, k = z.shape
    if alpha == 0:
        probs = softmax(z)
        return np.hstack([np.zeros((n, 1)), probs])
    mus = np.stack([per_class[l]["mu"] for l in head.labels])
    revised = z.copy()
    open_logit = np.zeros(n)
    order = np.argsort(-z, axis=1)[:, :alpha]
    for r in range(n):
        for j in order[r]:
            spec = per_class[head.labels[j]]
            d = np.linalg.norm(z[r] - mus[j])
            w = float(weibull_cdf(d, spec["shape"], spec["scale"], spec["shift"]))
            revised[r, j] = z[r, j] * (1.0 - w)
            open_logit[r] += z[r, j] * w
    return softmax(np.hstack([open_logit[:, None], revised]))


def openmax_predict(head: ClassifierHead, features, per_class: dict,
                    alpha: int) -> DetectionResult:
    probs = openmax_scores(head, features, per_class, alpha)
    open_p = probs[:, 0]
    known_best = np.argmax(probs[:, 1:], axis=1)
    labels = []
    conf = np.empty(probs.shape[0])
    for r in range(probs.shape[0]):
        if open_p[r] >= 0.5:
            labels.append(OPEN_LABEL)
            conf[r] = open_p[r]
        else:
            labels.append(head.labels[known_best[r]])
            conf[r] = probs[r, 1 + known_best[r]]
    return DetectionResult(tuple(labels), conf, "openmax-prob")


# ---------------------------------------------------------------------------
# DeepUnk: LOF over encoder features

def lof_scores(train_x, query_x, k_lof: int) -> np.ndarray:
    """Local outlier factor of each query point relative to the training set.

    Densities use the standard reachability construction; 1e-12 is added to
    every distance so duplicate points keep reachability finite.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    query_x = np.asarray(query_x, dtype=np.float64)
    n = train_x.shape[0]
    if k_lof >= n:
        raise ValueError(f"k_lof must be < number of training points ({n}): {k_lof}")
    if k_lof < 1:
        raise ValueError(f"k_lof must be >= 1: {k_lof}")

    d_tt = _pairwise(train_x, train_x) + 1e-12
    np.fill_diagonal(d_tt, np.inf)
    order_tt = np.argsort(d_tt, axis=1, kind="stable")[:, :k_lof]
    rows = np.arange(n)[:, None]
    kdist = d_tt[rows, order_tt][:, -1]

    # lrd of training points, neighbors within the training set minus self
    reach_tt = np.maximum(kdist[order_tt], d_tt[rows, order_tt])
    lrd_train = k_lof / reach_tt.sum(axis=1)

    d_qt = _pairwise(query_x, train_x) + 1e-12
    order_qt = np.argsort(d_qt, axis=1, kind="stable")[:, :k_lof]
    qrows = np.arange(query_x.shape[0])[:, None]
    reach_qt = np.maximum(kdist[order_qt], d_qt[qrows, order_qt])
    lrd_query = k_lof / reach_qt.sum(axis=1)
    return lrd_train[order_qt].mean(axis=1) / lrd_query


def _pairwise(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    b = a if b is None else b
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(sq, 0.0))


def _margin_loss_and_grads(head: ClassifierHead, x: np.ndarray, y_idx: np.ndarray,
                           margin: float, scale: float):
    """Large-margin cosine softmax loss and flat-parameter gradients.

    Logits are scale * (cos(r, w_j) - margin * 1[j = y]); bias gradients are
    zero because cosine logits ignore the bias.
    """
    n = x.shape[0]
    acts, pre = head.encoder.forward_cached(x)
    r = acts[-1]
    r_norm = np.maximum(np.linalg.norm(r, axis=1, keepdims=True), 1e-12)
    w_norm = np.maximum(np.linalg.norm(head.w_out, axis=0, keepdims=True), 1e-12)
    r_hat = r / r_norm
    w_hat = head.w_out / w_norm
    cosine = r_hat @ w_hat
    onehot = np.zeros_like(cosine)
    onehot[np.arange(n), y_idx] = 1.0
    z = scale * (cosine - margin * onehot)

    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    value = float(-logp[np.arange(n), y_idx].mean())
    dz = (np.exp(logp) - onehot) / n
    dcos = scale * dz

    d_rhat = dcos @ w_hat.T
    d_what = r_hat.T @ dcos
    # undo the normalizations: project out the radial component
    dr = (d_rhat - r_hat * (r_hat * d_rhat).sum(axis=1, keepdims=True)) / r_norm
    dw_out = (d_what - w_hat * (w_hat * d_what).sum(axis=0, keepdims=True)) / w_norm

    grads = []
    da = dr
    layer_grads = []
    last = len(head.encoder.weights) - 1
    for i in range(last, -1, -1):
        dzi = da if i == last else da * (pre[i] > 0)
        layer_grads.append((acts[i].T @ dzi, dzi.sum(axis=0)))
        da = dzi @ head.encoder.weights[i].T
    for dw, db in reversed(layer_grads):
        grads.extend([dw.ravel(), db.ravel()])
    grads.extend([dw_out.ravel(), np.zeros_like(head.b_out).ravel()])
    return value, np.concatenate(grads)


def margin_finetune(head: ClassifierHead, features: FeatureMatrix, labels,
                    epochs: int = 10, learning_rate: float = 0.05,
                    margin: float = 0.35, scale: float = 30.0,
                    batch_size: int = 32, seed: int = 0) -> ClassifierHead:
    """Fine-tune a trained head with the large-margin cosine objective;
    the returned head scores with scaled cosine logits."""
    tuned = head.copy()
    tuned.activation = "cosine"
    tuned.scale = scale
    class_index = {c: i for i, c in enumerate(tuned.labels)}
    y = np.asarray([class_index[l] for l in labels])
    x = features.values
    rng = rng_for(seed, "margin-shuffle")
    n = x.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            _, grad = _margin_loss_and_grads(tuned, x[batch], y[batch], margin, scale)
            tuned.set_flat_params(tuned.get_flat_params() - learning_rate * grad)
        value, _ = _margin_loss_and_grads(tuned, x, y, margin, scale)
        if not np.isfinite(value):
            raise RuntimeError(f"NaN margin loss at epoch {epoch}")
        tuned.train_history.append(value)
    return tuned


def deepunk_fit(features: FeatureMatrix, labels, params: dict | None = None,
                train_config: TrainConfig | None = None, seed: int = 0) -> DetectorModel:
    params = dict(params or {})
    lof_threshold = float(params.get("lof_threshold", 1.5))
    head = train_classifier(features, labels, train_config)
    if params.get("margin_tune", False):
        head = margin_finetune(head, features, labels,
                               epochs=int(params.get("margin_epochs", 10)),
                               learning_rate=float(params.get("margin_learning_rate", 0.05)),
                               margin=float(params.get("margin", 0.35)),
                               scale=float(params.get("margin_scale", 30.0)),
                               seed=seed)
    train_reprs = head.representation(features)
    k_lof = int(params.get("k_lof", 20))
    k_lof = min(k_lof, train_reprs.shape[0] - 1)
    model_params = {"k_lof": k_lof, "lof_threshold": lof_threshold,
                    "train_features": train_reprs,
                    "margin_tune": bool(params.get("margin_tune", False))}
    return DetectorModel("deepunk", head.labels, model_params, head,
                         features.meta.get("featurizer_fingerprint"))


def deepunk_predict(model: DetectorModel, features) -> DetectionResult:
    reprs = _representation(model, features)
    lof = lof_scores(model.params["train_features"], reprs, model.params["k_lof"])
    if model.head is not None:
        known = model.head.predicted_labels(_as_matrix(features, model.head))
    else:
        raise ValueError("deepunk prediction requires a classifier head")
    tau = model.params["lof_threshold"]
    labels = tuple(OPEN_LABEL if lof[i] > tau else known[i] for i in range(len(known)))
    conf = np.minimum(1.0, 1.0 / np.maximum(lof, 1e-12))
    return DetectionResult(labels, conf, "lof-negated")


# ---------------------------------------------------------------------------
# ADB: adaptive decision boundaries

def _softplus(t: float) -> float:
    return math.log1p(math.exp(-abs(t))) + max(t, 0.0)


def _sigmoid_scalar(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _inv_softplus(d: float) -> float:
    return float(np.log(np.expm1(max(d, 1e-6))))


def boundary_loss_and_grad(theta: float, distances: np.ndarray) -> tuple[float, float]:
    """Boundary loss sum_x |d(x) - softplus(theta)| and its theta-gradient.

    Points outside the radius pull it up, points inside push it down:
    dL/dtheta = sigmoid(theta) * (n_inside - n_outside).
    """
    d = np.asarray(distances, dtype=np.float64)
    delta = _softplus(theta)
    inside = d <= delta
    value = float(np.where(inside, delta - d, d - delta).sum())
    grad = _sigmoid_scalar(theta) * float(inside.sum() - (~inside).sum())
    return value, grad


def fit_radius(distances, epochs: int = 300, learning_rate: float = 0.5) -> tuple[float, list[float]]:
    """Minimize the boundary loss for one class by backtracking subgradient
    descent on theta; returns (radius, per-epoch loss history)."""
    d = np.asarray(distances, dtype=np.float64)
    if d.shape[0] == 0:
        raise ValueError("cannot fit a radius with no distances")
    theta = _inv_softplus(float(d.mean()))
    value, _ = boundary_loss_and_grad(theta, d)
    history = [value]
    lr = learning_rate
    for _ in range(epochs):
        value, grad = boundary_loss_and_grad(theta, d)
        if grad == 0.0:
            history.append(value)
            continue
        # halve the step until it no longer increases the loss
        moved = False
        g = grad / d.shape[0]
        while lr > 1e-12:
            cand = theta - lr * g
            cand_value, _ = boundary_loss_and_grad(cand, d)
            if cand_value <= value:
                theta = cand
                value = cand_value
                moved = True
                break
            lr *= 0.5
        history.append(value)
        if not moved:
            break
    return _softplus(theta), history


def adb_fit(features, labels, epochs: int = 300, learning_rate: float = 0.5,
            head: ClassifierHead | None = None,
            fingerprint: str | None = None) -> DetectorModel:
    """Frozen class-mean centers plus learned per-class radii.

    ``features`` are representation-space vectors (raw arrays or encoder
    outputs); when a head is supplied its encoder defines that space.

    The balanced boundary loss settles where as many training points sit
    outside the radius as inside, which for a one-sided distance sample is
    the interior median: half the class's own points would be rejected. So
    the per-class fit runs on the distances augmented with their reflection
    about the class's largest distance (the same one-sided-sample device the
    sigmoid-threshold method uses), moving the balance point to a radius
    that covers the class. A single far outlier therefore widens its class
    boundary; that tradeoff is deliberate and documented.
    """
    x = _feature_values(features)
    labels = list(labels)
    classes = tuple(sorted(set(labels)))
    centers = np.empty((len(classes), x.shape[1]))
    radii = np.empty(len(classes))
    histories = {}
    for i, cls in enumerate(classes):
        rows = x[np.asarray([l == cls for l in labels])]
        centers[i] = rows.mean(axis=0)
        dists = np.linalg.norm(rows - centers[i], axis=1)
        mirrored = np.concatenate([dists, 2.0 * dists.max() - dists])
        radii[i], history = fit_radius(mirrored, epochs, learning_rate)
        # the mirrored multiset balances exactly at max(dists); the softplus
        # parameterization can land an ulp short, so snap up with enough
        # headroom to survive the predict-time distance recomputation
        radii[i] = max(radii[i], float(dists.max()) * (1.0 + 1e-12))
        histories[cls] = history
        if not np.isfinite(history[-1]):
            raise RuntimeError(f"NaN boundary loss for class {cls}")
    fp = fingerprint
    if fp is None and isinstance(features, FeatureMatrix):
        fp = features.meta.get("featurizer_fingerprint")
    return DetectorModel("adb", classes, {"centers": centers, "radii": radii},
                         head, fp, {"loss_history": histories})


def adb_predict(model: DetectorModel, features) -> DetectionResult:
    x = _representation(model, features)
    centers = model.params["centers"]
    radii = model.params["radii"]
    d = _pairwise(x, centers)
    nearest = np.argmin(d, axis=1)  # ties resolve to the lower class index
    labels = []
    conf = np.empty(x.shape[0])
    for r in range(x.shape[0]):
        i = nearest[r]
        dist, delta = d[r, i], radii[i]
        labels.append(model.labels[i] if dist <= delta else OPEN_LABEL)
        if delta == 0.0:
            conf[r] = 1.0 if dist == 0.0 else 0.0
        else:
            conf[r] = min(max(1.0 - dist / (2.0 * delta), 0.0), 1.0)
    return DetectionResult(tuple(labels), conf, "boundary-margin")


# ---------------------------------------------------------------------------
# uniform fit/predict entry points

def fit_detector(method: str, features: FeatureMatrix, labels,
                 params: dict | None = None, train_config: TrainConfig | None = None,
                 seed: int = 0) -> DetectorModel:
    params = dict(params or {})
    if method == "msp":
        return msp_fit(features, labels, params, train_config)
    if method == "doc":
        return doc_fit(features, labels, params, train_config)
    if method == "openmax":
        return openmax_fit(features, labels, params, train_config)
    if method == "deepunk":
        return deepunk_fit(features, labels, params, train_config, seed)
    if method == "adb":
        head = train_classifier(features, labels, train_config)
        reprs = head.representation(features)
        return adb_fit(reprs, labels, epochs=int(params.get("adb_epochs", 300)),
                       learning_rate=float(params.get("adb_learning_rate", 0.5)),
                       head=head, fingerprint=features.meta.get("featurizer_fingerprint"))
    raise ValueError(f"unknown detection method: {method!r}")


def detect_predict(model: DetectorModel, features) -> DetectionResult:
    _check_fingerprint(model, features)
    if model.method == "msp":
        return msp_predict(model.head, features, model.params["threshold"])
    if model.method == "doc":
        return doc_predict(model.head, features, model.params["thresholds"])
    if model.method == "openmax":
        return openmax_predict(model.head, features, model.params["per_class"],
                               model.params["revision_rank"])
    if model.method == "deepunk":
        return deepunk_predict(model, features)
    if model.method == "adb":
        return adb_predict(model, features)
    raise ValueError(f"unknown detection method: {model.method!r}")
