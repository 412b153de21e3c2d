"""Single-hidden-layer perceptron trained by full-batch gradient descent.

Logistic sigmoid hidden units, softmax output, mean cross-entropy
loss. Training uses momentum 0.9 and learning rate 0.01, stopping
early when the validation loss has not improved for 25 consecutive
epochs; the best-validation weights are restored. Weights start
uniform in +/- sqrt(6 / (fan_in + fan_out)) from the run seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from ..rng import SplitMix64
from .common import LabeledSet


@dataclass
class MlpTrainConfig:
    hidden: int
    learning_rate: float = 0.01
    momentum: float = 0.9
    patience: int = 25
    max_epochs: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise InvalidArgumentError("hidden unit count must be >= 1")
        if self.max_epochs < 1:
            raise InvalidArgumentError("max_epochs must be >= 1")


@dataclass
class MlpModel:
    w1: np.ndarray  # (dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, classes)
    b2: np.ndarray  # (classes,)
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    epochs_run: int = 0

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = _sigmoid(x @ model.w1 + model.b1)
    probs = _softmax(hidden @ model.w2 + model.b2)
    return hidden, probs


def _loss(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def mlp_gradients(model: MlpModel, x: np.ndarray, labels: np.ndarray,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of the mean cross-entropy w.r.t. w1, b1, w2, b2."""
    n = x.shape[0]
    hidden, probs = _forward(model, x)
    delta_out = probs.copy()
    delta_out[np.arange(n), labels] -= 1.0
    delta_out /= n
    gw2 = hidden.T @ delta_out
    gb2 = delta_out.sum(axis=0)
    delta_hidden = (delta_out @ model.w2.T) * hidden * (1.0 - hidden)
    gw1 = x.T @ delta_hidden
    gb1 = delta_hidden.sum(axis=0)
    return gw1, gb1, gw2, gb2


def _init_model(dim: int, hidden: int, n_classes: int, rng_seed: int) -> MlpModel:
    rng = SplitMix64(rng_seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        u = rng.random_array(fan_in * fan_out).reshape(fan_in, fan_out)
        return (2.0 * u - 1.0) * bound

    return MlpModel(w1=glorot(dim, hidden), b1=np.zeros(hidden),
                    w2=glorot(hidden, n_classes), b2=np.zeros(n_classes))


def mlp_train(train: LabeledSet, validation: LabeledSet, cfg: MlpTrainConfig,
              n_classes: int | None = None) -> MlpModel:
    """Gradient descent with momentum and validation-based early stopping."""
    if validation.n < 1:
        raise InvalidArgumentError("validation set must be non-empty")
    if validation.dim != train.dim:
        raise InvalidArgumentError("train and validation dims differ")
    n_classes = n_classes or max(train.n_classes, validation.n_classes)
    model = _init_model(train.dim, cfg.hidden, n_classes, cfg.rng_seed)

    params = [model.w1, model.b1, model.w2, model.b2]
    velocity = [np.zeros_like(p) for p in params]
    best_val = np.inf
    best_weights = [p.copy() for p in params]
    best_epoch = 0
    since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        grads = mlp_gradients(model, train.features, train.labels)
        for p, v, g in zip(params, velocity, grads):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
        _, train_probs = _forward(model, train.features)
        model.train_losses.append(_loss(train_probs, train.labels))
        _, val_probs = _forward(model, validation.features)
        val_loss = _loss(val_probs, validation.labels)
        model.val_losses.append(val_loss)
        model.epochs_run = epoch

        if val_loss < best_val:
            best_val = val_loss
            best_weights = [p.copy() for p in params]
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    model.w1, model.b1, model.w2, model.b2 = best_weights
    model.epochs_run = best_epoch
    return model


def mlp_predict_batch(model: MlpModel, queries: np.ndarray,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """(class ids, probability rows); argmax ties go to the lowest class id."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != model.dim:
        raise InvalidArgumentError(
            f"query dim {queries.shape[1]} does not match model dim {model.dim}")
    _, probs = _forward(model, queries)
    return np.argmax(probs, axis=1), probs


def mlp_predict(model: MlpModel, query: np.ndarray) -> tuple[int, np.ndarray]:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise InvalidArgumentError("query must be a 1-D vector")
    ids, probs = mlp_predict_batch(model, query[None, :])
    return int(ids[0]), probs[0]
