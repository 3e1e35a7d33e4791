"""Membership inference attack against a protected model.

The attacker trains a shadow head on data it controls, collects the shadow
model's (output vector, one-hot label) pairs for records inside and outside
the shadow training set, and fits a small binary MLP on those pairs. Attack
accuracy against the victim is the fraction of balanced member/non-member
queries the classifier gets right at threshold 0.5; 0.5 is random guessing.

Records carry a provenance tag so the trainer can refuse victim-derived
records: the classifier must only ever see shadow outputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pipeline import Dataset, encode, one_hot, predict, predict_from_representations
from .protection import ProtectedModel
from .rng import RngStream
from .weights import WeightVector

SHADOW_SOURCE = "shadow"
VICTIM_SOURCE = "victim"

_STREAM_IN = 0
_STREAM_OUT = 1


@dataclass(frozen=True)
class AttackRecord:
    """One (model output, true label, membership) training example."""

    output_vector: np.ndarray
    label_onehot: np.ndarray
    membership: int
    source: str = SHADOW_SOURCE

    def __post_init__(self):
        out = np.asarray(self.output_vector, dtype=np.float64).copy()
        lab = np.asarray(self.label_onehot, dtype=np.float64).copy()
        out.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "output_vector", out)
        object.__setattr__(self, "label_onehot", lab)
        if out.ndim != 1 or lab.ndim != 1 or out.shape != lab.shape:
            raise ValueError("output_vector and label_onehot must be 1-d and the same length")
        if abs(out.sum() - 1.0) > 1e-9:
            raise ValueError(f"output_vector must sum to 1 within 1e-9, got {out.sum()!r}")
        nonzero = np.flatnonzero(lab)
        if len(nonzero) != 1 or lab[nonzero[0]] != 1.0:
            raise ValueError("label_onehot must have exactly one entry equal to 1")
        if self.membership not in (0, 1):
            raise ValueError(f"membership must be 0 or 1, got {self.membership}")
        if self.source not in (SHADOW_SOURCE, VICTIM_SOURCE):
            raise ValueError(f"unknown record source {self.source!r}")

    @property
    def num_classes(self) -> int:
        return len(self.output_vector)


@dataclass(frozen=True)
class AttackClassifierConfig:
    """Shape and schedule of the binary membership classifier."""

    epochs: int
    seed: int
    hidden_layers: int = 5
    hidden_width: int = 64
    learning_rate: float = 0.001
    train_pairs: int = 2000

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.hidden_width < 1:
            raise ValueError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.train_pairs < 2 or self.train_pairs % 2:
            raise ValueError(f"train_pairs must be even and >= 2, got {self.train_pairs}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in u64, got {self.seed}")


@dataclass(frozen=True)
class AttackClassifier:
    """Trained membership MLP: ReLU hidden stack, sigmoid output."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    num_classes: int

    def __post_init__(self):
        frozen = []
        for w, b in self.layers:
            w = np.asarray(w, dtype=np.float64).copy()
            b = np.asarray(b, dtype=np.float64).copy()
            w.flags.writeable = False
            b.flags.writeable = False
            frozen.append((w, b))
        object.__setattr__(self, "layers", tuple(frozen))
        if self.layers[0][0].shape[0] != 2 * self.num_classes:
            raise ValueError("first layer width must match 2 * num_classes")
        if self.layers[-1][0].shape[1] != 1:
            raise ValueError("output layer must have a single unit")


def _stack_inputs(records) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([np.concatenate([r.output_vector, r.label_onehot]) for r in records])
    ys = np.array([r.membership for r in records], dtype=np.float64)
    return xs, ys


def _layer_init(stream: RngStream, fan_in: int, fan_out: int, gain: float) -> tuple[np.ndarray, np.ndarray]:
    # symmetric uniform; gain 6 keeps variance flat through a ReLU stack,
    # gain 3 is the linear-output choice; bias starts at zero
    bound = np.sqrt(gain / fan_in)
    w = (stream.uniforms(fan_in * fan_out) * 2.0 - 1.0) * bound
    return w.reshape(fan_in, fan_out), np.zeros(fan_out)


def _init_layers(cfg: AttackClassifierConfig, num_classes: int):
    sizes = [2 * num_classes] + [cfg.hidden_width] * cfg.hidden_layers + [1]
    last = len(sizes) - 2
    return [
        _layer_init(RngStream(cfg.seed, i), sizes[i], sizes[i + 1], 3.0 if i == last else 6.0)
        for i in range(len(sizes) - 1)
    ]


def _forward(layers, x: np.ndarray):
    pre_acts = []
    h = x
    for w, b in layers[:-1]:
        z = h @ w + b
        pre_acts.append((h, z))
        h = np.maximum(z, 0.0)
    w, b = layers[-1]
    logits = (h @ w + b).ravel()
    return pre_acts, h, logits


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def build_attack_dataset(
    shadow_theta: WeightVector,
    shadow_omega: WeightVector,
    in_set: Dataset,
    out_set: Dataset,
    pairs: int,
    seed: int,
) -> list[AttackRecord]:
    """Balanced shadow-output records: pairs/2 members, pairs/2 non-members.

    Sampling is seeded and without replacement within each partition.
    """
    if pairs < 2 or pairs % 2:
        raise ValueError(f"pairs must be even and >= 2, got {pairs}")
    half = pairs // 2
    if len(in_set) < half or len(out_set) < half:
        raise ValueError(
            f"need {half} records in each partition, have {len(in_set)} in / {len(out_set)} out"
        )
    if in_set.num_classes != out_set.num_classes:
        raise ValueError("partitions must share num_classes")

    records: list[AttackRecord] = []
    for dataset, stream_index, membership in (
        (in_set, _STREAM_IN, 1),
        (out_set, _STREAM_OUT, 0),
    ):
        picks = RngStream(seed, stream_index).permutation(len(dataset))[:half]
        reps = encode(shadow_theta, dataset.features[picks])
        probs = predict_from_representations(shadow_omega, reps)
        labels = one_hot(dataset.labels[picks], dataset.num_classes)
        for p, l in zip(probs, labels):
            records.append(AttackRecord(p, l, membership))
    return records


def train_attack_classifier(records, cfg: AttackClassifierConfig) -> AttackClassifier:
    """Full-batch gradient descent on binary cross-entropy.

    Input is the concatenated (output vector, one-hot label); hidden stack is
    cfg.hidden_layers ReLU layers of cfg.hidden_width; output is one sigmoid
    unit. Deterministic given cfg.seed. Refuses victim-tagged records.
    """
    records = list(records)
    if not records:
        raise ValueError("no attack records given")
    if any(r.source == VICTIM_SOURCE for r in records):
        raise ValueError("attack classifier must be trained on shadow records only")
    classes = {r.membership for r in records}
    if classes != {0, 1}:
        raise ValueError("attack training set must contain both members and non-members")
    num_classes = records[0].num_classes
    if any(r.num_classes != num_classes for r in records):
        raise ValueError("all attack records must share num_classes")

    x, y = _stack_inputs(records)
    layers = _init_layers(cfg, num_classes)
    n = len(records)
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        pre_acts, h_last, logits = _forward(layers, x)
        # d(BCE)/d(logit) for sigmoid output
        g = (_sigmoid(logits) - y).reshape(-1, 1) / n
        w_out, b_out = layers[-1]
        grad_h = g @ w_out.T
        layers[-1] = (w_out - lr * (h_last.T @ g), b_out - lr * g.sum(axis=0))
        for i in range(len(layers) - 2, -1, -1):
            h_in, z = pre_acts[i]
            gz = grad_h * (z > 0)
            w, b = layers[i]
            grad_h = gz @ w.T
            layers[i] = (w - lr * (h_in.T @ gz), b - lr * gz.sum(axis=0))
    return AttackClassifier(tuple(layers), num_classes)


def membership_scores(classifier: AttackClassifier, records) -> np.ndarray:
    """Probability-of-membership per record, in record order."""
    records = list(records)
    if not records:
        return np.zeros(0)
    if any(r.num_classes != classifier.num_classes for r in records):
        raise ValueError("record width does not match the classifier")
    x, _ = _stack_inputs(records)
    _, _, logits = _forward(classifier.layers, x)
    return _sigmoid(logits)


def records_accuracy(classifier: AttackClassifier, records) -> float:
    """Fraction of records whose thresholded score matches membership."""
    records = list(records)
    if not records:
        raise ValueError("no records to score")
    scores = membership_scores(classifier, records)
    truth = np.array([r.membership for r in records])
    return float(np.mean((scores >= 0.5) == (truth == 1)))


def _victim_records(model: ProtectedModel, dataset: Dataset, membership: int,
                    use_protected_outputs: int) -> list[AttackRecord]:
    omega = model.omega_noisy if use_protected_outputs else model.omega_clean
    reps = encode(model.theta, dataset.features)
    probs = predict_from_representations(omega, reps)
    labels = one_hot(dataset.labels, dataset.num_classes)
    return [
        AttackRecord(p, l, membership, source=VICTIM_SOURCE)
        for p, l in zip(probs, labels)
    ]


def attack_accuracy(
    classifier: AttackClassifier,
    victim: ProtectedModel,
    members: Dataset,
    nonmembers: Dataset,
    use_protected_outputs: int,
    seed: int,
) -> float:
    """Score the classifier against the victim on a balanced evaluation set.

    Victim outputs come from omega_noisy when use_protected_outputs is 1 and
    omega_clean otherwise. Unequal sets are subsampled (seeded, without
    replacement) down to the smaller size so 0.5 stays the guessing baseline.
    """
    if len(members) == 0 or len(nonmembers) == 0:
        raise ValueError("evaluation sets must be nonempty")
    size = min(len(members), len(nonmembers))
    picks_in = RngStream(seed, _STREAM_IN).permutation(len(members))[:size]
    picks_out = RngStream(seed, _STREAM_OUT).permutation(len(nonmembers))[:size]
    records = _victim_records(victim, members.subset(picks_in), 1, use_protected_outputs)
    records += _victim_records(victim, nonmembers.subset(picks_out), 0, use_protected_outputs)
    return records_accuracy(classifier, records)


def save_attack_records(records, path) -> None:
    """CSV with C output columns, C label columns, and a membership column."""
    records = list(records)
    if not records:
        raise ValueError("no records to save")
    c = records[0].num_classes
    if any(r.num_classes != c for r in records):
        raise ValueError("all records must share num_classes")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"out_{i}" for i in range(c)] + [f"label_{i}" for i in range(c)] + ["membership"]
        )
        for r in records:
            writer.writerow(
                [repr(float(v)) for v in r.output_vector]
                + [repr(float(v)) for v in r.label_onehot]
                + [r.membership]
            )


def load_attack_records(path, source: str = SHADOW_SOURCE) -> list[AttackRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    if len(header) % 2 != 1 or header[-1] != "membership":
        raise ValueError(f"{path} does not look like an attack-record file")
    c = len(header) // 2
    records = []
    for row in rows[1:]:
        out = np.array([float(v) for v in row[:c]])
        lab = np.array([float(v) for v in row[c:2 * c]])
        records.append(AttackRecord(out, lab, int(row[2 * c]), source=source))
    return records
