"""Momentum federated learning (MFL) and the plain FL baseline.

Each node runs local steps on its own data; every ``tau`` steps the server
averages the node parameters (and, for MFL, the momenta) weighted by local
dataset size and writes the result back to every node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .core import DomainError, StructuralError, sizes_weighted_average
from .data import Dataset, Partition
from .models import ModelSpec
from .optim import RunTrace

ALGORITHMS = ("mfl", "fl")


@dataclass
class NodeState:
    w: np.ndarray
    d: np.ndarray | None = None  # None on the FL path


@dataclass(frozen=True)
class FedConfig:
    eta: float
    gamma: float
    tau: int
    T: int
    N: int
    model: ModelSpec
    seed: int = 0
    algorithm: str = "mfl"
    init: str = "zeros"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"unknown algorithm {self.algorithm!r}")
        if not self.eta > 0:
            raise DomainError("eta must be positive")
        if not 0 <= self.gamma < 1:
            raise DomainError("gamma must lie in [0, 1)")
        if self.tau < 1 or self.T < 1 or self.N < 1:
            raise DomainError("tau, T and N must be >= 1")
        if self.T % self.tau:
            raise DomainError(f"T={self.T} is not a multiple of tau={self.tau}")
        if self.init not in ("zeros", "uniform"):
            raise DomainError(f"unknown init {self.init!r}")

    @property
    def K(self) -> int:
        return self.T // self.tau

    def initial_w(self, dim: int) -> np.ndarray:
        if self.init == "zeros":
            return np.zeros(dim)
        return np.random.default_rng(self.seed).uniform(-0.01, 0.01, dim)


@dataclass
class FedResult:
    w_f: np.ndarray
    trace: RunTrace
    snapshots: list[tuple[int, np.ndarray, np.ndarray | None]]
    aggregate_losses: list[float] = field(default_factory=list)  # F(w(k tau)), k = 1..K

    @property
    def best_k(self) -> int:
        return int(np.argmin(self.aggregate_losses)) + 1


def local_update(node: NodeState, spec: ModelSpec, data: Dataset, eta: float, gamma: float) -> NodeState:
    """One MGD step on the node's own loss: momentum first, then parameters."""
    g = models.gradient(spec, node.w, data)
    d = gamma * node.d + g
    return NodeState(node.w - eta * d, d)


def local_update_fl(node: NodeState, spec: ModelSpec, data: Dataset, eta: float) -> NodeState:
    return NodeState(node.w - eta * models.gradient(spec, node.w, data))


def global_aggregate(nodes: list[NodeState], sizes) -> tuple[np.ndarray, np.ndarray | None]:
    if len(nodes) != len(sizes):
        raise StructuralError("one size per node required")
    w = sizes_weighted_average(sizes, [n.w for n in nodes])
    if any(n.d is None for n in nodes):
        return w, None
    return w, sizes_weighted_average(sizes, [n.d for n in nodes])


def run_federated(
    config: FedConfig,
    partition: Partition,
    test_set: Dataset | None = None,
    w0=None,
    record_params: bool = False,
) -> FedResult:
    """Run MFL or FL for ``config.T`` local iterations.

    The trace records, at every ``t``, the global loss of the size-weighted
    average of the current node parameters.  At ``t = k tau`` that average is
    the real aggregate; in between it is a read-only virtual one.
    """
    if partition.N != config.N:
        raise StructuralError(f"partition has {partition.N} nodes, config expects {config.N}")
    spec = config.model
    mfl = config.algorithm == "mfl"
    sizes = partition.sizes
    data = partition.global_dataset
    w_init = config.initial_w(partition.dim) if w0 is None else np.array(w0, dtype=np.float64)
    if w_init.shape != (partition.dim,):
        raise StructuralError("w0 does not match the data dimension")

    d_init = np.zeros_like(w_init) if mfl else None
    nodes = [NodeState(w_init.copy(), None if d_init is None else d_init.copy()) for _ in range(config.N)]
    trace = RunTrace(label=config.algorithm, params=[] if record_params else None, momenta=[] if record_params else None)
    snapshots = [(0, w_init.copy(), None if d_init is None else d_init.copy())]

    def observe(t, w, d):
        acc = models.accuracy(spec, w, test_set) if test_set is not None else None
        value = models.loss(spec, w, data)
        trace.record(t, value, acc, w, d if d is not None else np.zeros_like(w))
        return value

    observe(0, w_init, d_init)
    w_f, best = None, np.inf
    agg_losses = []
    for t in range(1, config.T + 1):
        if mfl:
            nodes = [local_update(n, spec, D, config.eta, config.gamma) for n, D in zip(nodes, partition.node_data)]
        else:
            nodes = [local_update_fl(n, spec, D, config.eta) for n, D in zip(nodes, partition.node_data)]
        w, d = global_aggregate(nodes, sizes)
        value = observe(t, w, d)
        if t % config.tau == 0:
            for n in nodes:
                n.w = w.copy()
                if mfl:
                    n.d = d.copy()
            snapshots.append((t // config.tau, w.copy(), None if d is None else d.copy()))
            agg_losses.append(value)
            if value < best:
                w_f, best = w.copy(), value
    return FedResult(w_f, trace, snapshots, agg_losses)


def final_model(result: FedResult) -> np.ndarray:
    return result.w_f
