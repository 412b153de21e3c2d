"""Shared containers for the classifier families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError


@dataclass
class LabeledSet:
    """Feature matrix with dense integer labels 0..C-1."""

    features: np.ndarray  # (n, dim) float64
    labels: np.ndarray    # (n,) int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise InvalidArgumentError("features must be a non-empty (n, dim) matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise InvalidArgumentError("one label per sample required")
        if self.labels.min() < 0:
            raise InvalidArgumentError("labels must be non-negative class ids")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass
class Standardizer:
    """Per-feature zero-mean unit-variance transform fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        features = np.asarray(features, dtype=np.float64)
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std[std == 0.0] = 1.0  # constant feature: leave centered at zero
        return cls(mean=mean, std=std)

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std
