"""Logistic-noise differential privacy for fine-tuned model heads.

Subpackages cover seeded noise primitives, budget/scale accounting with
numeric DP certificates, a deterministic desk-scale training pipeline, an
empirical sensitivity sampler, the post-training protection path, a
shadow-model membership-inference attack, and a sweep harness with a CLI.
"""

__version__ = "0.1.0"
