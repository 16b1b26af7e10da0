"""Pluggable utterance featurizers plus the small trainable encoder stack.

Three providers produce ``FeatureMatrix`` objects from utterances: TF-IDF
fitted on a corpus, mean word vectors from a GloVe-format text file, and
precomputed per-utterance embedding files. On top of any of them sits a
numpy MLP (``MlpEncoder``) and a linear ``ClassifierHead`` trained with
mini-batch gradient descent; detection methods consume its representations
and logits.

Tokenization everywhere: lowercase, split on Unicode whitespace, strip
leading/trailing punctuation.
"""

from __future__ import annotations

import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Utterance
from .utils import canonical_json, file_sha256, rng_for, sha256_hex


# ---------------------------------------------------------------------------
# tokenization

def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, strip surrounding punctuation."""
    out = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            out.append(tok)
    return out


# ---------------------------------------------------------------------------
# feature matrices

@dataclass
class FeatureMatrix:
    """n x d utterance representations with row-aligned utterance ids."""

    values: np.ndarray
    row_ids: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D array")
        if self.values.shape[1] < 2:
            raise ValueError("feature dimension must be at least 2")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")
        self.row_ids = tuple(self.row_ids)
        if len(self.row_ids) != self.values.shape[0]:
            raise ValueError("row_ids length does not match row count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def subset(self, ids) -> "FeatureMatrix":
        index = {rid: i for i, rid in enumerate(self.row_ids)}
        rows = [index[i] for i in ids]
        return FeatureMatrix(self.values[rows], tuple(ids), dict(self.meta))


def matrix_from_array(values, prefix: str = "row") -> FeatureMatrix:
    values = np.asarray(values, dtype=np.float64)
    return FeatureMatrix(values, tuple(f"{prefix}-{i}" for i in range(values.shape[0])))


# ---------------------------------------------------------------------------
# TF-IDF

class TfidfFeaturizer:
    """Document-frequency-capped TF-IDF with L2-normalized rows.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the fitted corpus; transform
    multiplies raw in-document counts by idf and normalizes each row.
    """

    kind = "tfidf"
    supports_text_embedding = True

    def __init__(self, vocabulary: dict[str, int], idf: np.ndarray, max_features: int):
        self.vocabulary = vocabulary
        self.idf = np.asarray(idf, dtype=np.float64)
        self.max_features = max_features

    @classmethod
    def fit(cls, corpus, max_features: int = 2000) -> "TfidfFeaturizer":
        if not corpus:
            raise ValueError("cannot fit tf-idf on an empty corpus")
        docs = [tokenize(u.text if isinstance(u, Utterance) else u) for u in corpus]
        df: dict[str, int] = {}
        for toks in docs:
            for t in set(toks):
                df[t] = df.get(t, 0) + 1
        if not df:
            raise ValueError("corpus has no tokens after tokenization")
        ranked = sorted(df, key=lambda t: (-df[t], t))[:max_features]
        if len(ranked) < 2:
            raise ValueError("tf-idf vocabulary needs at least 2 terms")
        vocab = {t: i for i, t in enumerate(sorted(ranked))}
        n_docs = len(docs)
        idf = np.empty(len(vocab))
        for t, i in vocab.items():
            idf[i] = np.log((1.0 + n_docs) / (1.0 + df[t])) + 1.0
        return cls(vocab, idf, max_features)

    def _rows(self, texts: list[str]) -> tuple[np.ndarray, list[int]]:
        mat = np.zeros((len(texts), len(self.vocabulary)))
        empty = []
        for r, text in enumerate(texts):
            hit = False
            for tok in tokenize(text):
                col = self.vocabulary.get(tok)
                if col is not None:
                    mat[r, col] += 1.0
                    hit = True
            if not hit:
                empty.append(r)
        mat *= self.idf
        norms = np.linalg.norm(mat, axis=1)
        nonzero = norms > 0
        mat[nonzero] /= norms[nonzero, None]
        return mat, empty

    def transform(self, utterances) -> FeatureMatrix:
        texts = [u.text for u in utterances]
        mat, empty = self._rows(texts)
        meta = {"featurizer_fingerprint": self.fingerprint()}
        if empty:
            ids = [utterances[r].id for r in empty]
            warnings.warn(f"{len(ids)} utterance(s) had no in-vocabulary tokens")
            meta["empty_rows"] = ids
        return FeatureMatrix(mat, tuple(u.id for u in utterances), meta)

    def embed_texts(self, texts) -> np.ndarray:
        mat, _ = self._rows(list(texts))
        return mat

    def fingerprint(self) -> str:
        state = {"kind": self.kind, "vocab": sorted(self.vocabulary),
                 "idf": [repr(v) for v in self.idf.tolist()]}
        return sha256_hex(canonical_json(state).encode())

    def to_jsonable(self) -> dict:
        return {"kind": self.kind, "max_features": self.max_features,
                "vocabulary": self.vocabulary, "idf": self.idf.tolist()}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "TfidfFeaturizer":
        return cls(dict(obj["vocabulary"]), np.asarray(obj["idf"]), obj["max_features"])


# ---------------------------------------------------------------------------
# word vectors (GloVe text format)

def load_word_vectors(path) -> dict[str, np.ndarray]:
    """Parse a GloVe-format text file: ``token v1 ... vd`` per line."""
    table: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 3:
                raise ValueError(f"{path}: malformed vector line {lineno}")
            token = parts[0]
            try:
                vec = np.asarray([float(p) for p in parts[1:] if p != ""], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}: unparseable float at line {lineno}") from exc
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(f"{path}: inconsistent vector dimension at line {lineno}")
            table[token] = vec
    if not table:
        raise ValueError(f"{path}: empty word-vector file")
    return table


def average_embed(table: dict[str, np.ndarray], utterances) -> FeatureMatrix:
    """Mean of in-vocabulary token vectors; all-OOV rows become zero vectors."""
    dim = len(next(iter(table.values())))
    mat = np.zeros((len(utterances), dim))
    all_oov = []
    for r, utt in enumerate(utterances):
        vecs = [table[t] for t in tokenize(utt.text) if t in table]
        if vecs:
            mat[r] = np.mean(vecs, axis=0)
        else:
            all_oov.append(utt.id)
    meta = {}
    if all_oov:
        warnings.warn(f"{len(all_oov)} utterance(s) had no in-vocabulary tokens")
        meta["all_oov_ids"] = all_oov
    return FeatureMatrix(mat, tuple(u.id for u in utterances), meta)


class WordVecFeaturizer:
    kind = "wordvec"
    supports_text_embedding = True

    def __init__(self, path):
        self.path = str(path)
        self.table = load_word_vectors(path)
        self._fingerprint = sha256_hex(f"wordvec:{file_sha256(path)}".encode())

    def transform(self, utterances) -> FeatureMatrix:
        fm = average_embed(self.table, utterances)
        fm.meta["featurizer_fingerprint"] = self.fingerprint()
        return fm

    def embed_texts(self, texts) -> np.ndarray:
        dim = len(next(iter(self.table.values())))
        mat = np.zeros((len(texts), dim))
        for r, text in enumerate(texts):
            vecs = [self.table[t] for t in tokenize(text) if t in self.table]
            if vecs:
                mat[r] = np.mean(vecs, axis=0)
        return mat

    def fingerprint(self) -> str:
        return self._fingerprint

    def to_jsonable(self) -> dict:
        return {"kind": self.kind, "path": self.path, "fingerprint": self._fingerprint}


# ---------------------------------------------------------------------------
# precomputed embedding files

def load_precomputed(path, utterances) -> FeatureMatrix:
    """Read a ``dim=<d>`` headed, tab-separated id-to-vector file and select
    rows for the requested utterances, in their order."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"{path}: missing 'dim=<d>' header")
        try:
            dim = int(header[4:])
        except ValueError as exc:
            raise ValueError(f"{path}: bad dimension in header {header!r}") from exc
        rows: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rid, payload = line.split("\t", 1)
            except ValueError as exc:
                raise ValueError(f"{path}: malformed row at line {lineno}") from exc
            if rid in rows:
                raise ValueError(f"duplicate embedding id: {rid}")
            try:
                vec = np.asarray([float(p) for p in payload.split()], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}: unparseable float at line {lineno}") from exc
            if vec.shape[0] != dim:
                raise ValueError(
                    f"{path}: dimension mismatch at line {lineno}: expected {dim}, got {vec.shape[0]}")
            rows[rid] = vec
    mat = np.empty((len(utterances), dim))
    for r, utt in enumerate(utterances):
        if utt.id not in rows:
            raise ValueError(f"missing embedding for id: {utt.id}")
        mat[r] = rows[utt.id]
    return FeatureMatrix(mat, tuple(u.id for u in utterances))


class PrecomputedFeaturizer:
    kind = "precomputed"
    supports_text_embedding = False

    def __init__(self, path):
        self.path = str(path)
        self._fingerprint = sha256_hex(f"precomputed:{file_sha256(path)}".encode())

    def transform(self, utterances) -> FeatureMatrix:
        fm = load_precomputed(self.path, utterances)
        fm.meta["featurizer_fingerprint"] = self.fingerprint()
        return fm

    def fingerprint(self) -> str:
        return self._fingerprint

    def to_jsonable(self) -> dict:
        return {"kind": self.kind, "path": self.path, "fingerprint": self._fingerprint}


FEATURIZER_KINDS = ("tfidf", "wordvec", "precomputed")


def make_featurizer(spec: dict, train_utterances=None):
    """Build a featurizer from a config spec, fitting TF-IDF when needed."""
    kind = spec.get("type")
    if kind == "tfidf":
        if train_utterances is None:
            raise ValueError("tfidf featurizer requires a training corpus to fit")
        return TfidfFeaturizer.fit(train_utterances, max_features=spec.get("max_features", 2000))
    if kind == "wordvec":
        return WordVecFeaturizer(spec["path"])
    if kind == "precomputed":
        return PrecomputedFeaturizer(spec["path"])
    raise ValueError(f"unknown featurizer type: {kind!r}")


def featurizer_from_jsonable(obj: dict):
    kind = obj.get("kind")
    if kind == "tfidf":
        return TfidfFeaturizer.from_jsonable(obj)
    if kind == "wordvec":
        feat = WordVecFeaturizer(obj["path"])
    elif kind == "precomputed":
        feat = PrecomputedFeaturizer(obj["path"])
    else:
        raise ValueError(f"unknown featurizer kind: {kind!r}")
    if feat.fingerprint() != obj["fingerprint"]:
        raise ValueError(f"featurizer file changed since the model was saved: {obj['path']}")
    return feat


# ---------------------------------------------------------------------------
# numpy MLP encoder + classifier head

def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; rows sum to 1 within 1e-9."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class TrainConfig:
    """Hyperparameters for the encoder/classifier training loop."""

    hidden: int = 128
    repr_dim: int = 64
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0


class MlpEncoder:
    """Fully-connected stack: ReLU on hidden layers, identity output."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError("weight/bias shape mismatch")

    @classmethod
    def init(cls, sizes: list[int], seed: int) -> "MlpEncoder":
        # uniform(-sqrt(6/(fan_in+fan_out)), +) per layer, one seeded stream
        rng = rng_for(seed, "mlp-init")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(x, dtype=np.float64)
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input dim {a.shape[1]} does not match encoder d_in {self.sizes[0]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                a = np.maximum(a, 0.0)
        return a

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer activations for backprop."""
        acts = [np.asarray(x, dtype=np.float64)]
        pre = []
        a = acts[0]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            a = np.maximum(z, 0.0) if i != last else z
            acts.append(a)
        return acts, pre

    def copy(self) -> "MlpEncoder":
        return MlpEncoder([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_jsonable(self) -> dict:
        return {"weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "MlpEncoder":
        return cls([np.asarray(w) for w in obj["weights"]],
                   [np.asarray(b) for b in obj["biases"]])


class ClassifierHead:
    """Encoder plus a linear output layer over the known classes.

    ``activation`` selects how logits become scores: 'softmax' (closed-world
    probabilities), 'sigmoid' (independent one-vs-rest scores), or 'cosine'
    (scaled cosine logits; used by the margin-tuned variant).
    """

    def __init__(self, encoder: MlpEncoder, w_out: np.ndarray, b_out: np.ndarray,
                 labels: tuple[str, ...], activation: str = "softmax", scale: float = 1.0):
        self.encoder = encoder
        self.w_out = np.asarray(w_out, dtype=np.float64)
        self.b_out = np.asarray(b_out, dtype=np.float64)
        self.labels = tuple(labels)
        if activation not in ("softmax", "sigmoid", "cosine"):
            raise ValueError(f"unknown head activation: {activation!r}")
        self.activation = activation
        self.scale = scale
        self.train_history: list[float] = []
        if self.w_out.shape[1] != len(self.labels):
            raise ValueError("output width does not match class count")

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def representation(self, fm: FeatureMatrix) -> np.ndarray:
        return self.encoder.forward(fm.values)

    def logits(self, fm: FeatureMatrix) -> np.ndarray:
        reprs = self.representation(fm)
        if self.activation == "cosine":
            rn = reprs / np.maximum(np.linalg.norm(reprs, axis=1, keepdims=True), 1e-12)
            wn = self.w_out / np.maximum(np.linalg.norm(self.w_out, axis=0, keepdims=True), 1e-12)
            return self.scale * (rn @ wn)
        return reprs @ self.w_out + self.b_out

    def scores(self, fm: FeatureMatrix) -> np.ndarray:
        z = self.logits(fm)
        return sigmoid(z) if self.activation == "sigmoid" else softmax(z)

    def predicted_labels(self, fm: FeatureMatrix) -> list[str]:
        return [self.labels[i] for i in np.argmax(self.logits(fm), axis=1)]

    # flat parameter views for optimizers and finite-difference checks
    def get_flat_params(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.encoder.weights, self.encoder.biases):
            parts.extend([w.ravel(), b.ravel()])
        parts.extend([self.w_out.ravel(), self.b_out.ravel()])
        return np.concatenate(parts)

    def set_flat_params(self, vec: np.ndarray) -> None:
        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            chunk = vec[pos:pos + size].reshape(shape)
            pos += size
            return chunk.copy()

        for i in range(len(self.encoder.weights)):
            self.encoder.weights[i] = take(self.encoder.weights[i].shape)
            self.encoder.biases[i] = take(self.encoder.biases[i].shape)
        self.w_out = take(self.w_out.shape)
        self.b_out = take(self.b_out.shape)
        if pos != vec.shape[0]:
            raise ValueError("flat parameter vector has wrong length")

    def copy(self) -> "ClassifierHead":
        head = ClassifierHead(self.encoder.copy(), self.w_out.copy(), self.b_out.copy(),
                              self.labels, self.activation, self.scale)
        head.train_history = list(self.train_history)
        return head

    def to_jsonable(self) -> dict:
        return {"encoder": self.encoder.to_jsonable(), "w_out": self.w_out.tolist(),
                "b_out": self.b_out.tolist(), "labels": list(self.labels),
                "activation": self.activation, "scale": self.scale}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ClassifierHead":
        return cls(MlpEncoder.from_jsonable(obj["encoder"]), np.asarray(obj["w_out"]),
                   np.asarray(obj["b_out"]), tuple(obj["labels"]), obj["activation"],
                   obj.get("scale", 1.0))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def ce_loss_and_grads(head: ClassifierHead, x: np.ndarray, y_idx: np.ndarray,
                      loss: str = "softmax"):
    """Loss and parameter gradients (flat, aligned with get_flat_params).

    'softmax': mean cross-entropy. 'sigmoid': one-vs-rest binary
    cross-entropy, mean over examples, summed over classes.
    """
    n = x.shape[0]
    acts, pre = head.encoder.forward_cached(x)
    reprs = acts[-1]
    z = reprs @ head.w_out + head.b_out
    onehot = np.zeros_like(z)
    onehot[np.arange(n), y_idx] = 1.0

    if loss == "softmax":
        logp = _log_softmax(z)
        value = float(-logp[np.arange(n), y_idx].mean())
        dz = (np.exp(logp) - onehot) / n
    elif loss == "sigmoid":
        # stable BCE-with-logits: max(z,0) - z*y + log1p(exp(-|z|))
        value = float((np.maximum(z, 0) - z * onehot + np.log1p(np.exp(-np.abs(z)))).sum() / n)
        dz = (sigmoid(z) - onehot) / n
    else:
        raise ValueError(f"unknown loss: {loss!r}")

    grads = []
    dw_out = reprs.T @ dz
    db_out = dz.sum(axis=0)
    da = dz @ head.w_out.T
    layer_grads = []
    last = len(head.encoder.weights) - 1
    for i in range(last, -1, -1):
        dzi = da if i == last else da * (pre[i] > 0)
        layer_grads.append((acts[i].T @ dzi, dzi.sum(axis=0)))
        da = dzi @ head.encoder.weights[i].T
    for dw, db in reversed(layer_grads):
        grads.extend([dw.ravel(), db.ravel()])
    grads.extend([dw_out.ravel(), db_out.ravel()])
    return value, np.concatenate(grads)


def train_classifier(features: FeatureMatrix, labels, config: TrainConfig | None = None,
                     loss: str = "softmax") -> ClassifierHead:
    """Train encoder + linear head on known-class labels with mini-batch GD.

    The returned head carries ``train_history``: full-data loss at epoch 0
    (after initialization) and after every epoch; with a fixed seed the final
    entry is expected to be below the first.
    """
    config = config or TrainConfig()
    labels = list(labels)
    if len(labels) != features.n:
        raise ValueError("labels length does not match feature rows")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("training requires at least 2 classes")
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.asarray([class_index[l] for l in labels])
    x = features.values

    encoder = MlpEncoder.init([features.dim, config.hidden, config.repr_dim], config.seed)
    rng = rng_for(config.seed, "head-init")
    bound = np.sqrt(6.0 / (config.repr_dim + len(classes)))
    head = ClassifierHead(encoder, rng.uniform(-bound, bound, (config.repr_dim, len(classes))),
                          np.zeros(len(classes)), classes, "sigmoid" if loss == "sigmoid" else "softmax")

    value, _ = ce_loss_and_grads(head, x, y, loss)
    head.train_history = [value]
    shuffle_rng = rng_for(config.seed, "shuffle")
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, grad = ce_loss_and_grads(head, x[batch], y[batch], loss)
            head.set_flat_params(head.get_flat_params() - config.learning_rate * grad)
        value, _ = ce_loss_and_grads(head, x, y, loss)
        if not np.isfinite(value):
            raise RuntimeError(
                f"NaN loss at epoch {epoch}; learning rate {config.learning_rate}, "
                f"batch size {config.batch_size}")
        head.train_history.append(value)
    return head


def encode(encoder: MlpEncoder, features: FeatureMatrix) -> FeatureMatrix:
    """Run features through an encoder, preserving row ids."""
    return FeatureMatrix(encoder.forward(features.values), features.row_ids, dict(features.meta))


def logits(head: ClassifierHead, features: FeatureMatrix) -> np.ndarray:
    return head.logits(features)
