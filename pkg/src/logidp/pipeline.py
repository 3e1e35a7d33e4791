"""Deterministic desk-scale training pipeline.

A one-hidden-layer encoder is pretrained on a self-supervised pseudo-label
task (predict which seeded signed coordinate permutation was applied to the
input), then a bias-free linear softmax head is fit on the frozen encoder's
outputs by full-batch gradient descent. Every training step is an explicit
numpy expression over seeded draws, so identical inputs give bitwise-identical
weights; the sensitivity sampler depends on that.

The encoder nonlinearity is sinh: odd and unbounded, it stretches the scale
spectrum of the representations, so different records tolerate very different
amounts of weight noise. That gives weight perturbation studies a wide, smooth
utility transition instead of a single cliff.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream
from .weights import WeightVector, make_tag, parse_tag

# Pseudo-label task size: the identity plus three seeded transformations.
PSEUDO_TASK_CLASSES = 4

_STREAM_INIT = 0
_STREAM_TASK = 1


@dataclass(frozen=True)
class Record:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for either training stage.

    hidden_dims feeds the encoder (first entry is the hidden width); the
    head ignores it. epochs=0 and learning_rate=0 are constructible so the
    zero-step behavior is testable, but both trainers insist on epochs >= 1.
    weight_decay adds lr * weight_decay * w to each update (an L2 pull toward
    zero); it damps how far any single record can drag the trained weights.
    """

    hidden_dims: tuple[int, ...] = (8,)
    epochs: int = 200
    learning_rate: float = 0.5
    seed: int = 0
    init_scale: float = 0.1
    weight_decay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_dims}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if not (math.isfinite(self.init_scale) and self.init_scale > 0):
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0):
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in an unsigned 64-bit int, got {self.seed}")


@dataclass(frozen=True)
class Dataset:
    """Ordered feature/label arrays; order is part of the dataset's identity."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if f.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ValueError("labels must be one per record")
        if not np.all(np.isfinite(f)):
            raise ValueError("features must be finite")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be positive, got {self.num_classes}")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        f.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def record(self, i: int) -> Record:
        return Record(self.features[i], int(self.labels[i]))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def without_index(self, i: int) -> "Dataset":
        if not 0 <= i < len(self):
            raise IndexError(f"record index {i} out of range")
        keep = np.concatenate([np.arange(i), np.arange(i + 1, len(self))])
        return self.subset(keep)

    @staticmethod
    def from_records(records, num_classes: int) -> "Dataset":
        if not records:
            raise ValueError("need at least one record")
        feats = np.stack([np.asarray(r.features, dtype=np.float64) for r in records])
        labels = np.array([r.label for r in records], dtype=np.int64)
        return Dataset(feats, labels, num_classes)


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Header row f0..f{d-1},label; floats as repr so the round trip is exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.feature_dim)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_dataset_csv(path, num_classes: int | None = None) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise ValueError(f"not a dataset CSV (missing label column): {path}")
        feats, labels = [], []
        for row in reader:
            feats.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    if not feats:
        raise ValueError(f"dataset CSV has no records: {path}")
    y = np.array(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1
    return Dataset(np.array(feats, dtype=np.float64), y, num_classes)


def save_dataset_npz(dataset: Dataset, path) -> None:
    np.savez(path, features=dataset.features, labels=dataset.labels,
             num_classes=np.int64(dataset.num_classes))


def load_dataset_npz(path) -> Dataset:
    with np.load(path) as data:
        return Dataset(data["features"], data["labels"], int(data["num_classes"]))


# Total width, in octaves, of the per-class tightness ladder below.
_SPREAD_LADDER_OCTAVES = 2.0


def class_spread_factors(num_classes: int) -> np.ndarray:
    """Per-class multipliers on cluster_spread, a geometric ladder around 1.

    Classes range from half to double the nominal spread (2 octaves total),
    so decision margins cover a range of scales instead of one shared one.
    A single class gets factor 1.
    """
    if num_classes == 1:
        return np.ones(1)
    t = np.arange(num_classes) / (num_classes - 1)
    return 2.0 ** (_SPREAD_LADDER_OCTAVES * (t - 0.5))


def make_synthetic_dataset(
    num_classes: int, per_class: int, feature_dim: int, cluster_spread: float, seed: int
) -> Dataset:
    """Gaussian class clusters with seeded centers, shuffled into one set.

    Centers are standard-normal draws; each record is its class center plus
    class-scaled cluster_spread times standard-normal noise. Per-class scale
    factors follow class_spread_factors, so some classes are tight and some
    diffuse around the same nominal spread.
    """
    if num_classes < 1 or per_class < 1 or feature_dim < 1:
        raise ValueError("num_classes, per_class, and feature_dim must be >= 1")
    if not (math.isfinite(cluster_spread) and cluster_spread >= 0):
        raise ValueError(f"cluster_spread must be nonnegative, got {cluster_spread}")
    from .noise import GaussianParams, sample_gaussian

    unit = GaussianParams(0.0, 1.0)
    centers = sample_gaussian(RngStream(seed, 0), unit, num_classes * feature_dim)
    centers = centers.reshape(num_classes, feature_dim)
    n = num_classes * per_class
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    jitter = sample_gaussian(RngStream(seed, 1), unit, n * feature_dim).reshape(n, feature_dim)
    spread = cluster_spread * class_spread_factors(num_classes)
    features = centers[labels] + spread[labels, None] * jitter
    order = RngStream(seed, 2).permutation(n)
    return Dataset(features[order], labels[order], num_classes)


def one_hot(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    out = np.zeros((y.size, num_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(logsumexp - z[np.arange(len(labels)), labels]))


def _uniform_init(stream: RngStream, count: int, init_scale: float) -> np.ndarray:
    return (2.0 * stream.uniforms(count) - 1.0) * init_scale


def _pseudo_task_transforms(feature_dim: int, seed: int):
    """Identity plus PSEUDO_TASK_CLASSES-1 seeded signed coordinate permutations."""
    stream = RngStream(seed, _STREAM_TASK)
    u = stream.uniforms(2 * (PSEUDO_TASK_CLASSES - 1) * feature_dim)
    perms = [np.arange(feature_dim)]
    signs = [np.ones(feature_dim)]
    pos = 0
    for _ in range(PSEUDO_TASK_CLASSES - 1):
        perms.append(np.argsort(u[pos : pos + feature_dim], kind="stable"))
        pos += feature_dim
        signs.append(np.where(u[pos : pos + feature_dim] < 0.5, -1.0, 1.0))
        pos += feature_dim
    return perms, signs


def _pseudo_task_data(dataset: Dataset, seed: int):
    perms, signs = _pseudo_task_transforms(dataset.feature_dim, seed)
    xs = [dataset.features[:, perm] * sign for perm, sign in zip(perms, signs)]
    x = np.concatenate(xs, axis=0)
    y = np.repeat(np.arange(PSEUDO_TASK_CLASSES, dtype=np.int64), len(dataset))
    return x, y


def _train_pseudo_task(dataset: Dataset, cfg: TrainConfig):
    if len(dataset) == 0:
        raise ValueError("pretraining dataset is empty")
    if cfg.epochs < 1:
        raise ValueError("training needs epochs >= 1")
    if not cfg.hidden_dims:
        raise ValueError("encoder needs a hidden width in hidden_dims")
    d, h, k = dataset.feature_dim, cfg.hidden_dims[0], PSEUDO_TASK_CLASSES
    x, y = _pseudo_task_data(dataset, cfg.seed)
    init = RngStream(cfg.seed, _STREAM_INIT)
    flat = _uniform_init(init, d * h + h + h * k + k, cfg.init_scale)
    w1 = flat[: d * h].reshape(d, h).copy()
    b1 = flat[d * h : d * h + h].copy()
    w2 = flat[d * h + h : d * h + h + h * k].reshape(h, k).copy()
    b2 = flat[d * h + h + h * k :].copy()
    yy = one_hot(y, k)
    n = x.shape[0]
    lr, wd = cfg.learning_rate, cfg.weight_decay
    for _ in range(cfg.epochs):
        pre = x @ w1 + b1
        hidden = np.sinh(pre)
        probs = _softmax(hidden @ w2 + b2)
        g = (probs - yy) / n
        d_hidden = (g @ w2.T) * np.cosh(pre)
        w2 -= lr * (hidden.T @ g + wd * w2)
        b2 -= lr * g.sum(axis=0)
        w1 -= lr * (x.T @ d_hidden + wd * w1)
        b1 -= lr * d_hidden.sum(axis=0)
    return w1, b1, w2, b2, x, y


def pretrain_encoder(dataset: Dataset, cfg: TrainConfig) -> WeightVector:
    """Train on the pseudo-label task and return the hidden layer.

    Pseudo-labels index which seeded transformation produced each input;
    dataset.labels never enter. The returned vector is the hidden layer's
    weight matrix (row-major) followed by its bias.
    """
    w1, b1, _, _, _, _ = _train_pseudo_task(dataset, cfg)
    tag = make_tag("encoder", **{"in": dataset.feature_dim, "hidden": w1.shape[1]})
    return WeightVector(np.concatenate([w1.ravel(), b1]), tag)


def pseudo_task_training_accuracy(dataset: Dataset, cfg: TrainConfig) -> float:
    """Accuracy of the full pretraining network on its own pseudo-task data."""
    w1, b1, w2, b2, x, y = _train_pseudo_task(dataset, cfg)
    probs = _softmax(np.sinh(x @ w1 + b1) @ w2 + b2)
    return accuracy(probs, y)


def _unflatten_encoder(theta: WeightVector):
    kind, dims = parse_tag(theta.shape_tag)
    if kind != "encoder" or set(dims) != {"in", "hidden"}:
        raise ValueError(f"not an encoder weight vector: {theta.shape_tag}")
    d, h = dims["in"], dims["hidden"]
    if len(theta) != d * h + h:
        raise ValueError("encoder weight vector length does not match its tag")
    return theta.values[: d * h].reshape(d, h), theta.values[d * h :]


def _unflatten_head(omega: WeightVector):
    kind, dims = parse_tag(omega.shape_tag)
    if kind != "head" or set(dims) != {"in", "classes"}:
        raise ValueError(f"not a head weight vector: {omega.shape_tag}")
    h, c = dims["in"], dims["classes"]
    if len(omega) != h * c:
        raise ValueError("head weight vector length does not match its tag")
    return omega.values.reshape(h, c)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"inputs must be 1-D or 2-D, got shape {arr.shape}")


def encoder_preactivation(theta: WeightVector, x):
    """Affine part of the encoder, before the nonlinearity."""
    w1, b1 = _unflatten_encoder(theta)
    batch, single = _as_batch(x)
    if batch.shape[1] != w1.shape[0]:
        raise ValueError(f"input dim {batch.shape[1]} does not match encoder dim {w1.shape[0]}")
    out = batch @ w1 + b1
    return out[0] if single else out


def encode(theta: WeightVector, x):
    """Deterministic forward pass; output width is the encoder hidden width."""
    pre = encoder_preactivation(theta, x)
    return np.sinh(pre)


def predict_from_representations(omega: WeightVector, reps):
    """Softmax head on precomputed representations."""
    w = _unflatten_head(omega)
    batch, single = _as_batch(reps)
    if batch.shape[1] != w.shape[0]:
        raise ValueError(f"representation dim {batch.shape[1]} does not match head dim {w.shape[0]}")
    probs = _softmax(batch @ w)
    return probs[0] if single else probs


def predict(theta: WeightVector, omega: WeightVector, x):
    """Probability vector(s) over classes for raw feature input."""
    return predict_from_representations(omega, encode(theta, x))


def _head_init(hidden: int, num_classes: int, cfg: TrainConfig) -> np.ndarray:
    flat = _uniform_init(RngStream(cfg.seed, _STREAM_INIT), hidden * num_classes, cfg.init_scale)
    return flat.reshape(hidden, num_classes).copy()


def _head_tag(hidden: int, num_classes: int) -> str:
    return make_tag("head", **{"in": hidden, "classes": num_classes})


def finetune_head(theta: WeightVector, dataset: Dataset, cfg: TrainConfig) -> WeightVector:
    """Fit the bias-free linear softmax head on encoded features.

    Full-batch gradient descent on mean cross-entropy for cfg.epochs steps
    from a seeded uniform init; the encoder is read, never written.
    cfg.weight_decay adds the usual L2 pull on every step (head_loss and
    head_loss_gradient report the cross-entropy term alone).
    learning_rate 0 returns the initialization exactly.
    """
    omega, _ = _finetune_head_traced(theta, dataset, cfg, trace=False)
    return omega


def finetune_head_loss_history(theta: WeightVector, dataset: Dataset, cfg: TrainConfig) -> np.ndarray:
    """Training loss before each step plus after the last: epochs + 1 values."""
    _, losses = _finetune_head_traced(theta, dataset, cfg, trace=True)
    return losses


def _finetune_head_traced(theta: WeightVector, dataset: Dataset, cfg: TrainConfig, trace: bool):
    if len(dataset) == 0:
        raise ValueError("fine-tuning dataset is empty")
    if cfg.epochs < 1:
        raise ValueError("training needs epochs >= 1")
    reps = encode(theta, dataset.features)
    n, hidden = reps.shape
    c = dataset.num_classes
    w = _head_init(hidden, c, cfg)
    yy = one_hot(dataset.labels, c)
    lr, wd = cfg.learning_rate, cfg.weight_decay
    losses = []
    for _ in range(cfg.epochs):
        logits = reps @ w
        if trace:
            losses.append(_cross_entropy(logits, dataset.labels))
        g = (_softmax(logits) - yy) / n
        w -= lr * (reps.T @ g + wd * w)
    if trace:
        losses.append(_cross_entropy(reps @ w, dataset.labels))
    omega = WeightVector(w.ravel(), _head_tag(hidden, c))
    return omega, np.array(losses)


def head_loss(theta: WeightVector, dataset: Dataset, omega: WeightVector) -> float:
    """Mean cross-entropy of the head on the dataset."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    w = _unflatten_head(omega)
    logits = encode(theta, dataset.features) @ w
    return _cross_entropy(logits, dataset.labels)


def head_loss_gradient(theta: WeightVector, dataset: Dataset, omega: WeightVector) -> np.ndarray:
    """Analytic gradient of head_loss in omega's flat layout."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    w = _unflatten_head(omega)
    reps = encode(theta, dataset.features)
    g = (_softmax(reps @ w) - one_hot(dataset.labels, dataset.num_classes)) / len(dataset)
    return (reps.T @ g).ravel()


def accuracy(predictions, labels) -> float:
    """Fraction of argmax matches; argmax ties resolve to the lowest class."""
    probs = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("need a nonempty batch of probability vectors")
    if probs.shape[0] != y.size:
        raise ValueError("predictions and labels must have equal length")
    return float(np.mean(np.argmax(probs, axis=1) == y))
