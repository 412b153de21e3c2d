"""k-nearest-neighbour classification with Euclidean distance.

Votes are either uniform or inverse-squared-distance weighted
(weight 1/(d^2 + 1e-12)). Neighbour ranking breaks distance ties by
training index; vote ties go to the class holding the nearest of the
tied neighbours, then to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from .common import LabeledSet

WEIGHTING_UNIFORM = "uniform"
WEIGHTING_INVERSE = "inverse-distance"
_EPS = 1e-12


@dataclass
class KnnModel:
    train: LabeledSet
    k: int
    weighting: str = WEIGHTING_UNIFORM


def knn_train(samples: LabeledSet, k: int, weighting: str = WEIGHTING_UNIFORM) -> KnnModel:
    if samples.n < 1:
        raise InvalidArgumentError("empty training set")
    if k < 1 or k > samples.n:
        raise InvalidArgumentError(
            f"k must be in [1, {samples.n}] for this training set, got {k}")
    if weighting not in (WEIGHTING_UNIFORM, WEIGHTING_INVERSE):
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")
    return KnnModel(train=samples, k=k, weighting=weighting)


def _vote(model: KnnModel, d2: np.ndarray) -> int:
    # rank neighbours by (distance, training index)
    order = np.lexsort((np.arange(len(d2)), d2))[:model.k]
    labels = model.train.labels[order]
    dists = d2[order]
    n_classes = model.train.n_classes
    if model.weighting == WEIGHTING_INVERSE:
        weights = 1.0 / (dists + _EPS)
    else:
        weights = np.ones(model.k)
    score = np.bincount(labels, weights=weights, minlength=n_classes)
    tied = np.flatnonzero(score == score.max())
    if len(tied) == 1:
        return int(tied[0])
    for lab in labels:  # nearest neighbour among the tied classes
        if lab in tied:
            return int(lab)
    return int(tied[0])


def knn_predict(model: KnnModel, query: np.ndarray) -> int:
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.train.dim,):
        raise InvalidArgumentError(
            f"query length {query.shape} does not match training dim {model.train.dim}")
    d2 = ((model.train.features - query) ** 2).sum(axis=1)
    return _vote(model, d2)


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != model.train.dim:
        raise InvalidArgumentError("queries must be (m, dim) matching the training dim")
    return np.array([_vote(model, ((model.train.features - q) ** 2).sum(axis=1))
                     for q in queries], dtype=np.intp)
