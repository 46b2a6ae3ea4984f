"""Synthetic multimodal datasets with known class structure.

Every class owns a latent prototype.  An item's latent vector is the sum of
the prototypes of its classes, and each modality observes a fixed random
linear map of that vector plus isotropic Gaussian noise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SynthSpec:
    n: int = 2000
    n_classes: int = 4
    dims: tuple = (64, 32)
    noise: tuple = (1.0, 1.0)
    multi_label_prob: float = 0.0
    latent_dim: int = 16
    # per-coordinate signal std of the clean features; sets the feature scale
    scale: float = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        noise = self.noise
        if np.isscalar(noise):
            noise = (float(noise),) * len(self.dims)
        object.__setattr__(self, "noise", tuple(float(s) for s in noise))
        if self.n < self.n_classes or self.n_classes < 1:
            raise ParameterError(f"need n >= n_classes >= 1 (n={self.n}, classes={self.n_classes})")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ParameterError(f"dims must be >= 1, got {self.dims}")
        if len(self.noise) != len(self.dims):
            raise ParameterError(f"{len(self.noise)} noise levels for {len(self.dims)} modalities")
        if any(s < 0 for s in self.noise):
            raise ParameterError(f"noise levels must be >= 0, got {self.noise}")
        if not 0 <= self.multi_label_prob <= 1:
            raise ParameterError(f"multi_label_prob must be in [0, 1], got {self.multi_label_prob}")
        if self.latent_dim < 1 or not self.scale > 0:
            raise ParameterError("latent_dim must be >= 1 and scale > 0")

    @property
    def n_modalities(self):
        return len(self.dims)


def generate(spec: SynthSpec):
    """Returns ``(features, labels)``: a list of (n, d_i) arrays and an (n, l) 0/1 matrix."""
    rng = np.random.default_rng(spec.seed)
    prototypes = rng.standard_normal((spec.n_classes, spec.latent_dim))
    primary = rng.integers(0, spec.n_classes, size=spec.n)
    labels = (rng.random((spec.n, spec.n_classes)) < spec.multi_label_prob).astype(np.int8)
    labels[np.arange(spec.n), primary] = 1
    latent = labels.astype(np.float64) @ prototypes

    features = []
    for d, sigma in zip(spec.dims, spec.noise):
        A = rng.standard_normal((spec.latent_dim, d)) * (spec.scale / np.sqrt(spec.latent_dim))
        X = latent @ A
        if sigma > 0:
            X = X + sigma * rng.standard_normal((spec.n, d))
        features.append(X)
    return features, labels


def write_dataset(spec: SynthSpec, out_dir, test_fraction=0.05, split_seed=None):
    """Generate, split into train/test, and write matrix files.

    Returns a dict of the written paths keyed like the run-config fields.
    """
    from .data import holdout_split
    from .io import save_matrix

    features, labels = generate(spec)
    seed = spec.seed if split_seed is None else split_seed
    Xtr, Ytr, Xte, Yte = holdout_split(features, labels, test_fraction, seed)
    os.makedirs(out_dir, exist_ok=True)
    paths = {"train_features": [], "test_features": []}
    for i, (a, b) in enumerate(zip(Xtr, Xte)):
        p_tr = os.path.join(out_dir, f"train_{i}.hmat")
        p_te = os.path.join(out_dir, f"test_{i}.hmat")
        save_matrix(p_tr, a)
        save_matrix(p_te, b)
        paths["train_features"].append(p_tr)
        paths["test_features"].append(p_te)
    paths["train_labels"] = os.path.join(out_dir, "train_labels.hmat")
    paths["test_labels"] = os.path.join(out_dir, "test_labels.hmat")
    save_matrix(paths["train_labels"], Ytr)
    save_matrix(paths["test_labels"], Yte)
    return paths
