"""Post-training weight protection: train, perturb once, answer queries.

The query handler trains the encoder and head, adds a single draw of
calibrated noise to the head weights, and serves every query from the noisy
copy. The clean head stays inside the ProtectedModel record purely so
utility loss can be measured against the unprotected model; it is excluded
from exported release files, as is the noise seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mechanisms import MechanismSpec, Sensitivity, budget_for_scale, sample_noise
from .pipeline import Dataset, TrainConfig, encode, finetune_head, predict_from_representations, pretrain_encoder
from .rng import RngStream
from .weights import WeightVector, load_weights, parse_tag, save_weights

_NOISE_STREAM = 0


def noise_vector(spec: MechanismSpec, noise_seed: int, n: int) -> np.ndarray:
    """The exact noise a ProtectedModel built from (spec, noise_seed) carries."""
    return sample_noise(spec, RngStream(noise_seed, _NOISE_STREAM), n)


@dataclass(frozen=True)
class ProtectedModel:
    """One protected release: frozen encoder, clean head, noisy head.

    omega_noisy = omega_clean + noise_vector(spec, noise_seed, len(omega_clean));
    the noise is applied exactly once, and re-protection always starts again
    from omega_clean.
    """

    theta: WeightVector
    omega_clean: WeightVector
    omega_noisy: WeightVector
    spec: MechanismSpec
    noise_seed: int

    def __post_init__(self):
        if self.omega_clean.shape_tag != self.omega_noisy.shape_tag:
            raise ValueError("clean and noisy heads must share a shape_tag")
        if len(self.omega_clean) != len(self.omega_noisy):
            raise ValueError("clean and noisy heads must have equal length")
        if not 0 <= int(self.noise_seed) < 2**64:
            raise ValueError(f"noise_seed must fit in an unsigned 64-bit int, got {self.noise_seed}")


def _check_compatible(theta: WeightVector, omega: WeightVector) -> None:
    kind_t, dims_t = parse_tag(theta.shape_tag)
    kind_o, dims_o = parse_tag(omega.shape_tag)
    if kind_t != "encoder" or kind_o != "head":
        raise ValueError(f"expected encoder and head weights, got {theta.shape_tag!r} and {omega.shape_tag!r}")
    if dims_t.get("hidden") != dims_o.get("in"):
        raise ValueError(
            f"encoder hidden width {dims_t.get('hidden')} does not match head input width {dims_o.get('in')}"
        )


def protect_existing(theta: WeightVector, omega: WeightVector, spec: MechanismSpec, noise_seed: int) -> ProtectedModel:
    """Perturb an already-trained head; nothing is retrained.

    Changing spec.scale and calling again re-protects the same weights at a
    new budget without another training run.
    """
    _check_compatible(theta, omega)
    noisy = WeightVector(omega.values + noise_vector(spec, noise_seed, len(omega)), omega.shape_tag)
    return ProtectedModel(theta, omega, noisy, spec, noise_seed)


def run_query_handler(
    pretrain_data: Dataset,
    finetune_data: Dataset,
    pre_cfg: TrainConfig,
    fine_cfg: TrainConfig,
    spec: MechanismSpec,
    noise_seed: int,
    queries,
):
    """Train encoder and head, protect the head, answer the queries.

    Returns (ProtectedModel, list of probability vectors), one vector per
    query, all computed from the noisy head.
    """
    theta = pretrain_encoder(pretrain_data, pre_cfg)
    omega = finetune_head(theta, finetune_data, fine_cfg)
    model = protect_existing(theta, omega, spec, noise_seed)
    return model, [predict_protected(model, q) for q in queries]


def predict_protected(model: ProtectedModel, x):
    """Released prediction path; reads only the noisy head."""
    return predict_from_representations(model.omega_noisy, encode(model.theta, x))


def predict_clean(model: ProtectedModel, x):
    """Evaluation-only path through the unprotected head."""
    return predict_from_representations(model.omega_clean, encode(model.theta, x))


def export_protected_model(model: ProtectedModel, base_path, sensitivity: Sensitivity | None = None) -> dict:
    """Write the release files: theta, noisy head, and a JSON sidecar.

    Produces {base}.theta.bin, {base}.omega.bin, and {base}.json. The sidecar
    records the mechanism kind, scale, and delta, plus the spent epsilon when
    a sensitivity record is supplied. The clean head and the noise seed are
    deliberately absent from all three files.
    """
    base = str(base_path)
    save_weights(model.theta, base + ".theta.bin")
    save_weights(model.omega_noisy, base + ".omega.bin")
    sidecar = {
        "kind": model.spec.kind.value,
        "scale": model.spec.scale,
        "delta": model.spec.delta,
    }
    if sensitivity is not None:
        sidecar["epsilon"] = budget_for_scale(model.spec, sensitivity).epsilon
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def load_protected_release(base_path) -> tuple[WeightVector, WeightVector, dict]:
    """Read back an exported release: (theta, omega_noisy, sidecar dict)."""
    base = str(base_path)
    theta = load_weights(base + ".theta.bin")
    omega_noisy = load_weights(base + ".omega.bin")
    with open(base + ".json") as fh:
        sidecar = json.load(fh)
    return theta, omega_noisy, sidecar
