"""Soft-margin SVM trained by sequential minimal optimization.

Multiclass problems are decomposed one-vs-one: a binary machine per
class pair, with the lower class id on the +1 side. Prediction counts
machine votes; vote ties fall to the larger summed |decision value|,
then the lowest class id.

The SMO solver is deterministic for a fixed sample order: the outer
loop sweeps samples in index order, the partner is picked by the
largest |E_i - E_j| over non-bound samples (ties to the lowest index)
with index-ordered fallback scans.

Kernels: linear, rbf(gamma), polynomial(degree, coef0). The named
Gaussian widths map to gamma = 1/dim (medium) and 1/(4*dim) (coarse);
quadratic/cubic are polynomial degree 2/3 with coef0 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, InvalidArgumentError
from .common import LabeledSet

KERNEL_LINEAR = "linear"
KERNEL_RBF = "rbf"
KERNEL_POLY = "polynomial"


@dataclass
class KernelSpec:
    kind: str
    gamma: float = 1.0     # rbf only
    degree: int = 2        # polynomial only
    coef0: float = 1.0     # polynomial only

    def __post_init__(self):
        if self.kind not in (KERNEL_LINEAR, KERNEL_RBF, KERNEL_POLY):
            raise InvalidArgumentError(f"unknown kernel kind {self.kind!r}")
        if self.kind == KERNEL_RBF and self.gamma <= 0.0:
            raise InvalidArgumentError("rbf gamma must be positive")
        if self.kind == KERNEL_POLY and self.degree not in (2, 3):
            raise InvalidArgumentError("polynomial degree must be 2 or 3")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(kind=KERNEL_LINEAR)

    @classmethod
    def rbf_medium(cls, dim: int) -> "KernelSpec":
        return cls(kind=KERNEL_RBF, gamma=1.0 / dim)

    @classmethod
    def rbf_coarse(cls, dim: int) -> "KernelSpec":
        return cls(kind=KERNEL_RBF, gamma=1.0 / (4.0 * dim))

    @classmethod
    def quadratic(cls) -> "KernelSpec":
        return cls(kind=KERNEL_POLY, degree=2, coef0=1.0)

    @classmethod
    def cubic(cls) -> "KernelSpec":
        return cls(kind=KERNEL_POLY, degree=3, coef0=1.0)


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cross = np.einsum("nd,md->nm", a, b)
    if spec.kind == KERNEL_LINEAR:
        return cross
    if spec.kind == KERNEL_POLY:
        return (cross + spec.coef0) ** spec.degree
    a_sq = np.einsum("nd,nd->n", a, a)
    b_sq = np.einsum("md,md->m", b, b)
    d2 = np.maximum(a_sq[:, None] - 2.0 * cross + b_sq[None, :], 0.0)
    return np.exp(-spec.gamma * d2)


@dataclass
class SvmBinary:
    """One trained binary machine of a one-vs-one decomposition."""

    class_pos: int               # lower class id, mapped to y=+1
    class_neg: int
    support_vectors: np.ndarray  # (n_sv, dim)
    dual_coef: np.ndarray        # (n_sv,) alpha_i * y_i
    bias: float
    alphas: np.ndarray           # (n_sv,) raw alpha values, 0 <= alpha <= C
    sv_labels: np.ndarray        # (n_sv,) +1/-1

    def decision(self, queries: np.ndarray, spec: KernelSpec) -> np.ndarray:
        k = kernel_matrix(spec, np.atleast_2d(queries), self.support_vectors)
        return k @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    kernel: KernelSpec
    C: float
    n_classes: int
    dim: int
    machines: list[SvmBinary] = field(default_factory=list)


class _Smo:
    """Platt-style SMO on a precomputed Gram matrix; see module docstring
    for the determinism rules."""

    def __init__(self, gram: np.ndarray, y: np.ndarray, C: float,
                 tol: float = 1e-3, max_passes: int = 2000):
        self.K = gram
        self.y = y.astype(np.float64)
        self.C = float(C)
        self.tol = tol
        self.max_passes = max_passes
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.errors = -self.y.copy()  # f(x) = 0 initially

    def _update_errors(self):
        f = self.K @ (self.alpha * self.y) + self.b
        self.errors = f - self.y

    def _take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        ai, aj = self.alpha[i], self.alpha[j]
        yi, yj = self.y[i], self.y[j]
        ei, ej = self.errors[i], self.errors[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(self.C, self.C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - self.C), min(self.C, ai + aj)
        if lo >= hi:
            return False
        eta = self.K[i, i] + self.K[j, j] - 2.0 * self.K[i, j]
        if eta > 0.0:
            aj_new = aj + yj * (ei - ej) / eta
            aj_new = min(max(aj_new, lo), hi)
        else:
            # flat or concave along the constraint: evaluate the endpoints
            f1 = yi * (ei + self.b) - ai * self.K[i, i] - yi * yj * aj * self.K[i, j]
            f2 = yj * (ej + self.b) - yi * yj * ai * self.K[i, j] - aj * self.K[j, j]
            l1 = ai + yi * yj * (aj - lo)
            h1 = ai + yi * yj * (aj - hi)
            obj_lo = (l1 * f1 + lo * f2 + 0.5 * l1 ** 2 * self.K[i, i]
                      + 0.5 * lo ** 2 * self.K[j, j] + yi * yj * lo * l1 * self.K[i, j])
            obj_hi = (h1 * f1 + hi * f2 + 0.5 * h1 ** 2 * self.K[i, i]
                      + 0.5 * hi ** 2 * self.K[j, j] + yi * yj * hi * h1 * self.K[i, j])
            if obj_lo < obj_hi - 1e-12:
                aj_new = lo
            elif obj_lo > obj_hi + 1e-12:
                aj_new = hi
            else:
                return False
        if abs(aj_new - aj) < 1e-12 * (aj_new + aj + 1e-12):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        # exact algebra keeps ai_new inside [0, C]; snap float fuzz back
        ai_new = min(max(ai_new, 0.0), self.C)

        b1 = (self.b - ei - yi * (ai_new - ai) * self.K[i, i]
              - yj * (aj_new - aj) * self.K[i, j])
        b2 = (self.b - ej - yi * (ai_new - ai) * self.K[i, j]
              - yj * (aj_new - aj) * self.K[j, j])
        if 0.0 < ai_new < self.C:
            b_new = b1
        elif 0.0 < aj_new < self.C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        delta_f = (yi * (ai_new - ai) * self.K[:, i]
                   + yj * (aj_new - aj) * self.K[:, j] + (b_new - self.b))
        self.errors += delta_f
        self.alpha[i], self.alpha[j] = ai_new, aj_new
        self.b = b_new
        return True

    def _examine(self, i: int) -> bool:
        yi, ai, ei = self.y[i], self.alpha[i], self.errors[i]
        r = ei * yi
        if not ((r < -self.tol and ai < self.C) or (r > self.tol and ai > 0.0)):
            return False
        non_bound = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.C))
        if len(non_bound) > 1:
            gaps = np.abs(ei - self.errors[non_bound])
            j = int(non_bound[int(np.argmax(gaps))])
            if self._take_step(i, j):
                return True
        for j in non_bound:
            if self._take_step(i, int(j)):
                return True
        for j in range(self.n):
            if self._take_step(i, j):
                return True
        return False

    def solve(self) -> tuple[np.ndarray, float]:
        examine_all = True
        passes = 0
        while passes < self.max_passes:
            passes += 1
            changed = 0
            if examine_all:
                self._update_errors()  # shed incremental drift once per sweep
                for i in range(self.n):
                    changed += self._examine(i)
            else:
                for i in np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.C)):
                    changed += self._examine(int(i))
            if examine_all:
                if changed == 0:
                    self._update_errors()
                    return self.alpha, self.b
                examine_all = False
            elif changed == 0:
                examine_all = True
        violations = int(np.sum(np.abs(self.errors * self.y) > self.tol))
        raise ConvergenceError(
            f"SMO did not converge after {self.max_passes} passes "
            f"({violations} samples outside KKT tolerance {self.tol})")


def _train_binary(features: np.ndarray, y: np.ndarray, spec: KernelSpec, C: float,
                  class_pos: int, class_neg: int, tol: float, max_passes: int) -> SvmBinary:
    gram = kernel_matrix(spec, features, features)
    solver = _Smo(gram, y, C, tol=tol, max_passes=max_passes)
    alpha, bias = solver.solve()
    keep = alpha > 1e-10
    return SvmBinary(class_pos=class_pos, class_neg=class_neg,
                     support_vectors=features[keep].copy(),
                     dual_coef=(alpha * y)[keep],
                     bias=bias, alphas=alpha[keep], sv_labels=y[keep])


def svm_train(samples: LabeledSet, kernel: KernelSpec, C: float = 1.0,
              tol: float = 1e-3, max_passes: int = 2000) -> SvmModel:
    """One-vs-one SMO training; raises ConvergenceError past the pass cap."""
    if C <= 0.0:
        raise InvalidArgumentError("C must be positive")
    classes = np.unique(samples.labels)
    if len(classes) < 2:
        raise InvalidArgumentError("need at least two classes to train an SVM")
    model = SvmModel(kernel=kernel, C=C, n_classes=samples.n_classes, dim=samples.dim)
    for a_idx in range(len(classes)):
        for b_idx in range(a_idx + 1, len(classes)):
            ca, cb = int(classes[a_idx]), int(classes[b_idx])
            mask = (samples.labels == ca) | (samples.labels == cb)
            feats = samples.features[mask]
            y = np.where(samples.labels[mask] == ca, 1.0, -1.0)
            model.machines.append(
                _train_binary(feats, y, kernel, C, ca, cb, tol, max_passes))
    return model


def svm_decision_values(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    """(m, n_machines) decision values, machines in training order."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    return np.stack([m.decision(queries, model.kernel) for m in model.machines], axis=1)


def svm_predict_batch(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != model.dim:
        raise InvalidArgumentError(
            f"query dim {queries.shape[1]} does not match model dim {model.dim}")
    values = svm_decision_values(model, queries)
    out = np.empty(queries.shape[0], dtype=np.intp)
    for qi in range(queries.shape[0]):
        votes = np.zeros(model.n_classes)
        magnitude = np.zeros(model.n_classes)
        for mi, machine in enumerate(model.machines):
            f = values[qi, mi]
            winner = machine.class_pos if f >= 0.0 else machine.class_neg
            votes[winner] += 1
            magnitude[winner] += abs(f)
        tied = np.flatnonzero(votes == votes.max())
        if len(tied) > 1:
            best_mag = magnitude[tied].max()
            tied = tied[magnitude[tied] == best_mag]
        out[qi] = int(tied[0])
    return out


def svm_predict(model: SvmModel, query: np.ndarray) -> int:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise InvalidArgumentError("query must be a 1-D vector")
    return int(svm_predict_batch(model, query[None, :])[0])
