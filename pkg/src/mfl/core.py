"""Shared vector helpers and the deterministic weighted average.

Parameter vectors (model weights, momenta, gradients) are plain 1-D
``float64`` numpy arrays throughout the package.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(ValueError):
    """Inputs have incompatible shapes or dimensions."""


class DivergenceError(RuntimeError):
    """An iterative run produced a non-finite loss."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"run diverged at iteration {iteration}")


def as_param_vector(values) -> np.ndarray:
    vec = np.array(values, dtype=np.float64).reshape(-1)
    if vec.size < 1:
        raise StructuralError("parameter vector must have dim >= 1")
    if not np.all(np.isfinite(vec)):
        raise DomainError("parameter vector has non-finite entries")
    return vec


def weighted_average(entries: Iterable[tuple[float, np.ndarray]]) -> np.ndarray:
    """Return ``sum_i w_i v_i / sum_i w_i``.

    Terms are accumulated in the order given (callers pass nodes in ascending
    index order) and the division by the total weight happens once at the
    end, so repeated calls on the same inputs are bit-identical.
    """
    entries = list(entries)
    if not entries:
        raise DomainError("weighted_average needs at least one entry")
    dim = np.shape(entries[0][1])
    acc = np.zeros(dim, dtype=np.float64)
    total = 0.0
    for weight, vec in entries:
        if weight < 0:
            raise DomainError(f"negative weight {weight}")
        if np.shape(vec) != dim:
            raise StructuralError(f"dimension mismatch: {np.shape(vec)} vs {dim}")
        acc += weight * np.asarray(vec, dtype=np.float64)
        total += weight
    if total <= 0:
        raise DomainError("total weight must be positive")
    return acc / total


def sizes_weighted_average(sizes: Sequence[int], vectors: Sequence[np.ndarray]) -> np.ndarray:
    if len(sizes) != len(vectors):
        raise StructuralError("sizes and vectors differ in length")
    return weighted_average(zip((float(s) for s in sizes), vectors))
