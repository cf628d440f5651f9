"""Convex losses, full-batch gradients and accuracy.

Supported kinds: ``svm`` (L2-regularized hinge), ``linreg`` (squared error),
``logreg`` (cross-entropy on a sigmoid), and ``quadratic`` (the synthetic
problem's ``1/2 ||w - x||^2`` with optional per-coordinate curvature).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import DomainError, StructuralError
from .data import Dataset, Partition

KINDS = ("svm", "linreg", "logreg", "quadratic")
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.kind == "svm" and not self.lam > 0:
            raise DomainError("svm needs lambda > 0")
        if self.lam < 0:
            raise DomainError("lambda must be nonnegative")

    @property
    def label_scheme(self) -> str:
        return "logistic" if self.kind == "logreg" else "svm_linear"


def _check(w, data: Dataset) -> np.ndarray:
    if len(data) == 0:
        raise DomainError("empty dataset")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.dim,):
        raise StructuralError(f"w has shape {w.shape}, data has dim {data.dim}")
    return w


def loss(spec: ModelSpec, w, data: Dataset) -> float:
    w = _check(w, data)
    n = len(data)
    if spec.kind == "quadratic":
        diff = w[None, :] - data.X
        weighted = diff * diff if data.curv is None else data.curv * diff * diff
        return float(weighted.sum() / (2 * n))
    z = data.X @ w
    y = data.y
    if spec.kind == "svm":
        hinge = np.maximum(0.0, 1.0 - y * z)
        return float(0.5 * spec.lam * (w @ w) + hinge.sum() / (2 * n))
    if spec.kind == "linreg":
        r = y - z
        return float((r @ r) / (2 * n))
    s = expit(z)
    ll = y * np.log(np.maximum(s, LOG_FLOOR)) + (1.0 - y) * np.log(np.maximum(1.0 - s, LOG_FLOOR))
    return float(-ll.sum() / n)


def gradient(spec: ModelSpec, w, data: Dataset) -> np.ndarray:
    """Exact full-batch (sub)gradient; the hinge contributes 0 at its kink."""
    w = _check(w, data)
    n = len(data)
    if spec.kind == "quadratic":
        diff = w[None, :] - data.X
        if data.curv is not None:
            diff = data.curv * diff
        return diff.sum(axis=0) / n
    X, y = data.X, data.y
    z = X @ w
    if spec.kind == "svm":
        active = (1.0 - y * z) > 0
        return spec.lam * w - (X.T @ (y * active)) / (2 * n)
    if spec.kind == "linreg":
        return -(X.T @ (y - z)) / n
    return (X.T @ (expit(z) - y)) / n


def predict(spec: ModelSpec, w, X) -> np.ndarray:
    z = np.asarray(X, dtype=np.float64) @ np.asarray(w, dtype=np.float64)
    if spec.kind == "logreg":
        # sigma(z) >= 0.5  <=>  z >= 0
        return np.where(z >= 0, 1.0, 0.0)
    if spec.kind == "quadratic":
        raise DomainError("the quadratic model has no predictions")
    return np.where(z >= 0, 1.0, -1.0)


def accuracy(spec: ModelSpec, w, data: Dataset) -> float:
    _check(w, data)
    return float(np.mean(predict(spec, w, data.X) == data.y))


def global_loss(spec: ModelSpec, w, partition: Partition) -> float:
    """Size-weighted average of node losses, accumulated in node order."""
    total = 0.0
    for d in partition.node_data:
        total += len(d) * loss(spec, w, d)
    return total / partition.total


def global_gradient(spec: ModelSpec, w, partition: Partition) -> np.ndarray:
    acc = np.zeros(partition.dim)
    for d in partition.node_data:
        acc += len(d) * gradient(spec, w, d)
    return acc / partition.total
