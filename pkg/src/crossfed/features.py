"""Frozen nonlinear feature maps applied before local training.

The random-Fourier map projects inputs through seeded Gaussian directions
and takes shifted cosines. Because the map is fully determined by its seed,
every node that knows the seed applies the exact same transformation
without ever exchanging it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .models import LabeledDataset
from .rngutil import seed_sequence

KINDS = ("rff", "identity")


@dataclass(frozen=True)
class FeatureExtractor:
    """Seeded feature map; equal fields imply bit-identical outputs."""

    seed: int
    input_dim: int
    output_dim: int
    kind: str = "rff"
    gamma: float = 1.0  # projection variance (kernel bandwidth)

    _omega: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _phase: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise InvalidInputError("input_dim and output_dim must be >= 1")
        if self.kind == "identity" and self.output_dim != self.input_dim:
            raise InvalidInputError("identity extractor requires output_dim == input_dim")
        if self.gamma <= 0.0:
            raise InvalidInputError(f"gamma must be positive, got {self.gamma}")
        if self.kind == "rff":
            rng = np.random.default_rng(seed_sequence(self.seed))
            omega = rng.normal(
                0.0, np.sqrt(self.gamma), size=(self.output_dim, self.input_dim)
            )
            phase = rng.uniform(0.0, 2.0 * np.pi, size=self.output_dim)
            object.__setattr__(self, "_omega", omega)
            object.__setattr__(self, "_phase", phase)


def transform(fx: FeatureExtractor, x: np.ndarray) -> np.ndarray:
    """Map a batch of rows through the extractor."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != fx.input_dim:
        raise InvalidInputError(f"expected shape (n, {fx.input_dim}), got {x.shape}")
    if fx.kind == "identity":
        return x.copy()
    return np.sqrt(2.0 / fx.output_dim) * np.cos(x @ fx._omega.T + fx._phase)


def extract(fx: FeatureExtractor, x) -> np.ndarray:
    """Map a single feature vector; output has length output_dim."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (fx.input_dim,):
        raise InvalidInputError(f"expected {fx.input_dim} features, got shape {x.shape}")
    return transform(fx, x[None, :])[0]


def augment_dataset(fx: FeatureExtractor, data: LabeledDataset) -> LabeledDataset:
    """Replace features with extracted ones; order and labels untouched."""
    return LabeledDataset(transform(fx, data.features), data.labels.copy())
