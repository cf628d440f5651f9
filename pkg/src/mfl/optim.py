"""Centralized gradient descent and heavy-ball momentum (MGD)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models
from .core import DivergenceError, DomainError, StructuralError
from .data import Dataset, Partition
from .models import ModelSpec


@dataclass(frozen=True)
class OptState:
    w: np.ndarray
    d: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, w0) -> "OptState":
        w0 = np.array(w0, dtype=np.float64)
        return cls(w0, np.zeros_like(w0), 0)


@dataclass
class RunTrace:
    """Per-iteration records; ``accuracy`` entries are ``None`` when not measured."""

    label: str = ""
    t: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    accuracy: list[float | None] = field(default_factory=list)
    params: list[np.ndarray] | None = None
    momenta: list[np.ndarray] | None = None

    def record(self, t: int, loss_value: float, acc: float | None = None, w=None, d=None):
        if not math.isfinite(loss_value):
            raise DivergenceError(t, f"{self.label or 'run'}: non-finite loss at iteration {t}")
        self.t.append(t)
        self.loss.append(loss_value)
        self.accuracy.append(acc)
        if self.params is not None:
            self.params.append(np.array(w, copy=True))
        if self.momenta is not None:
            self.momenta.append(np.array(d, copy=True))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final_loss(self) -> float:
        return self.loss[-1]


def gd_step(state: OptState, grad, eta: float) -> OptState:
    if not eta > 0:
        raise DomainError("eta must be positive")
    return OptState(state.w - eta * np.asarray(grad), state.d, state.t + 1)


def mgd_step(state: OptState, grad, eta: float, gamma: float) -> OptState:
    if not eta > 0:
        raise DomainError("eta must be positive")
    if not 0 <= gamma < 1:
        raise DomainError("gamma must lie in [0, 1)")
    d = gamma * state.d + np.asarray(grad)
    return OptState(state.w - eta * d, d, state.t + 1)


def _init_w(dim: int, w0) -> np.ndarray:
    if w0 is None:
        return np.zeros(dim)
    w0 = np.array(w0, dtype=np.float64)
    if w0.shape != (dim,):
        raise StructuralError(f"w0 has shape {w0.shape}, expected ({dim},)")
    return w0


def run_centralized(
    spec: ModelSpec,
    dataset: Dataset,
    eta: float,
    gamma: float,
    steps: int,
    test_set: Dataset | None = None,
    w0=None,
    record_params: bool = False,
) -> RunTrace:
    """Full-batch MGD (plain GD when ``gamma == 0``) on one dataset.

    The trace holds the initial point at ``t = 0`` followed by one record per
    step.  Raises :class:`DivergenceError` on a non-finite loss.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    state = OptState.initial(_init_w(dataset.dim, w0))
    trace = RunTrace(
        label="mgd" if gamma > 0 else "gd",
        params=[] if record_params else None,
        momenta=[] if record_params else None,
    )

    def observe(s: OptState):
        acc = models.accuracy(spec, s.w, test_set) if test_set is not None else None
        trace.record(s.t, models.loss(spec, s.w, dataset), acc, s.w, s.d)

    observe(state)
    for _ in range(steps):
        g = models.gradient(spec, state.w, dataset)
        state = mgd_step(state, g, eta, gamma) if gamma > 0 else gd_step(state, g, eta)
        observe(state)
    return trace


@dataclass
class IntervalTrace:
    """Centralized MGD over one aggregation interval, restarted from the aggregate.

    ``t[j]``, ``w[j]``, ``d[j]`` and ``grad[j] = grad F(w[j])`` cover
    ``t = (k-1) tau, ..., k tau``.
    """

    k: int
    t: list[int]
    w: list[np.ndarray]
    d: list[np.ndarray]
    grad: list[np.ndarray]
    loss: list[float]


def run_interval_reference(
    spec: ModelSpec,
    partition: Partition,
    snapshots,
    eta: float,
    gamma: float,
    tau: int,
    K: int | None = None,
) -> list[IntervalTrace]:
    """Per-interval centralized MGD on the global loss.

    ``snapshots`` is a sequence of ``(k, w(k tau), d(k tau))`` from a federated
    run (``k = 0`` being the initial point).  Interval ``[k]`` restarts from
    snapshot ``k - 1`` and runs ``tau`` steps.
    """
    by_k = {int(k): (np.asarray(w), np.asarray(d)) for k, w, d in snapshots}
    if K is None:
        K = max(by_k)
    data = partition.global_dataset
    out = []
    for k in range(1, K + 1):
        if k - 1 not in by_k:
            raise DomainError(f"missing aggregate snapshot for k={k - 1}")
        w, d = by_k[k - 1]
        state = OptState(np.array(w, dtype=np.float64), np.array(d, dtype=np.float64), (k - 1) * tau)
        rec = IntervalTrace(k, [], [], [], [], [])
        for j in range(tau + 1):
            g = models.gradient(spec, state.w, data)
            rec.t.append(state.t)
            rec.w.append(state.w)
            rec.d.append(state.d)
            rec.grad.append(g)
            rec.loss.append(models.loss(spec, state.w, data))
            if j < tau:
                state = mgd_step(state, g, eta, gamma)
        out.append(rec)
    return out
