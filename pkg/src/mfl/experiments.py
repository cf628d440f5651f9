"""Experiment configs and the runs behind each CLI command.

A config is one JSON document; unknown keys are rejected.  Example::

    {
      "dataset": {"kind": "mnist", "train_images": "data/mnist/train-images-idx3-ubyte.gz", ...},
      "model": {"kind": "svm", "lambda": 0.3},
      "eta": 0.002, "gamma": 0.5, "tau": 4, "T": 1000, "N": 4, "seed": 0
    }
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis, data, fed, models, optim
from .core import DivergenceError, DomainError

ATOL = 1e-12  # rounding slack when comparing a measured gap against its bound


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "dataset", "model", "eta", "gamma", "tau", "T", "N", "seed", "init",
    "algorithms", "gammas", "taus", "bounds", "probes", "output_dir",
}
_MNIST_KEYS = {"kind", "train_images", "train_labels", "test_images", "test_labels", "n_train", "n_test", "subset_seed"}
_SYNTH_KEYS = {"kind", "dim", "spread", "samples_per_node", "curvature_spread", "region_radius"}
_MODEL_KEYS = {"kind", "lambda"}
_BOUNDS_KEYS = {"source", "beta", "delta", "rho", "omega", "omega_fl", "theta", "cos_theta", "p", "w_star_steps"}
_PROBE_KEYS = {"count", "radius"}
_ALGS = ("mgd", "gd", "mfl", "fl")


def _reject_unknown(section: str, got: dict, allowed: set):
    extra = sorted(set(got) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(extra)}")


def _sorted_unique(name: str, values) -> list:
    values = list(values)
    if len(set(values)) != len(values) or values != sorted(values):
        raise ConfigError(f"{name} must be unique and sorted ascending")
    return values


@dataclass
class ExperimentConfig:
    dataset: dict
    model: models.ModelSpec
    eta: float
    gamma: float
    tau: int
    T: int
    N: int
    seed: int = 0
    init: str = "zeros"
    algorithms: list[str] = field(default_factory=lambda: ["mgd", "mfl", "fl"])
    gammas: list[float] | None = None
    taus: list[int] | None = None
    bounds: dict = field(default_factory=dict)
    probes: dict = field(default_factory=lambda: {"count": 16, "radius": 1.0})
    output_dir: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown("config", raw, _TOP_KEYS)
        for key in ("dataset", "model", "eta", "tau", "T", "N"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        ds = dict(raw["dataset"])
        kind = ds.get("kind")
        if kind == "mnist":
            _reject_unknown("dataset", ds, _MNIST_KEYS)
            for key in ("train_images", "train_labels"):
                if key not in ds:
                    raise ConfigError(f"mnist dataset needs {key!r}")
        elif kind == "synthetic":
            _reject_unknown("dataset", ds, _SYNTH_KEYS)
            if "dim" not in ds:
                raise ConfigError("synthetic dataset needs 'dim'")
        else:
            raise ConfigError(f"dataset.kind must be 'mnist' or 'synthetic', got {kind!r}")
        m = dict(raw["model"])
        _reject_unknown("model", m, _MODEL_KEYS)
        if kind == "synthetic":
            m.setdefault("kind", "quadratic")
        bounds = dict(raw.get("bounds", {}))
        _reject_unknown("bounds", bounds, _BOUNDS_KEYS)
        probes = {"count": 16, "radius": 1.0, **raw.get("probes", {})}
        _reject_unknown("probes", probes, _PROBE_KEYS)
        algorithms = list(raw.get("algorithms", ["mgd", "mfl", "fl"]))
        for a in algorithms:
            if a not in _ALGS:
                raise ConfigError(f"unknown algorithm {a!r}")

        try:
            spec = models.ModelSpec(m.get("kind", "svm"), float(m.get("lambda", 0.0)))
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(
            dataset=ds,
            model=spec,
            eta=float(raw["eta"]),
            gamma=float(raw.get("gamma", 0.0)),
            tau=int(raw["tau"]),
            T=int(raw["T"]),
            N=int(raw["N"]),
            seed=int(raw.get("seed", 0)),
            init=raw.get("init", "zeros"),
            algorithms=algorithms,
            gammas=_sorted_unique("gammas", raw["gammas"]) if "gammas" in raw else None,
            taus=_sorted_unique("taus", raw["taus"]) if "taus" in raw else None,
            bounds=bounds,
            probes=probes,
            output_dir=raw.get("output_dir"),
            base_dir=base_dir or Path.cwd(),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw, path.resolve().parent)

    def validate(self):
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.tau < 1 or self.N < 1:
            raise ConfigError("tau and N must be >= 1")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.T % self.tau:
            raise ConfigError(f"T={self.T} is not a multiple of tau={self.tau}")
        for tau in self.taus or []:
            if tau < 1 or self.T % tau:
                raise ConfigError(f"swept tau={tau} does not divide T={self.T}")
        for g in self.gammas or []:
            if not 0 <= g < 1:
                raise ConfigError(f"swept gamma={g} outside [0, 1)")
        if self.init not in ("zeros", "uniform"):
            raise ConfigError(f"unknown init {self.init!r}")

    def fed_config(self, algorithm: str, gamma: float | None = None, tau: int | None = None) -> fed.FedConfig:
        return fed.FedConfig(
            eta=self.eta,
            gamma=self.gamma if gamma is None else gamma,
            tau=self.tau if tau is None else tau,
            T=self.T,
            N=self.N,
            model=self.model,
            seed=self.seed,
            algorithm=algorithm,
            init=self.init,
        )

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


@dataclass
class Problem:
    spec: models.ModelSpec
    partition: data.Partition
    test_set: data.Dataset | None = None
    synthetic: data.SyntheticProblem | None = None

    @property
    def train(self) -> data.Dataset:
        return self.partition.global_dataset


def build_problem(cfg: ExperimentConfig) -> Problem:
    ds = cfg.dataset
    if ds["kind"] == "synthetic":
        if cfg.model.kind != "quadratic":
            raise ConfigError("synthetic datasets use the quadratic model")
        syn = data.make_synthetic(
            dim=int(ds["dim"]),
            N=cfg.N,
            seed=cfg.seed,
            spread=float(ds.get("spread", 1.0)),
            samples_per_node=int(ds.get("samples_per_node", 10)),
            curvature_spread=float(ds.get("curvature_spread", 0.0)),
            region_radius=ds.get("region_radius"),
        )
        return Problem(cfg.model, syn.partition, None, syn)
    if cfg.model.kind == "quadratic":
        raise ConfigError("the quadratic model needs a synthetic dataset")
    scheme = cfg.model.label_scheme
    subset_seed = int(ds.get("subset_seed", 0))
    try:
        train = data.load_mnist(cfg.path(ds["train_images"]), cfg.path(ds["train_labels"]),
                                ds.get("n_train", 5000), scheme, subset_seed)
        test = None
        if "test_images" in ds:
            test = data.load_mnist(cfg.path(ds["test_images"]), cfg.path(ds["test_labels"]),
                                   ds.get("n_test", 5000), scheme, subset_seed)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    return Problem(cfg.model, data.partition_uniform(train, cfg.N, cfg.seed), test)


# --------------------------------------------------------------------------
# runs


def _accuracy_set(problem: Problem):
    # only SVM reports test accuracy
    return problem.test_set if problem.spec.kind == "svm" else None


def run_algorithm(cfg: ExperimentConfig, problem: Problem, algorithm: str,
                  gamma: float | None = None, tau: int | None = None) -> optim.RunTrace:
    gamma = cfg.gamma if gamma is None else gamma
    test = _accuracy_set(problem)
    if algorithm in ("mgd", "gd"):
        w0 = cfg.fed_config("mfl", gamma, tau).initial_w(problem.partition.dim)
        trace = optim.run_centralized(problem.spec, problem.train, cfg.eta,
                                      0.0 if algorithm == "gd" else gamma, cfg.T, test, w0)
        trace.label = algorithm
        return trace
    return fed.run_federated(cfg.fed_config(algorithm, gamma, tau), problem.partition, test).trace


def run_all(cfg: ExperimentConfig, problem: Problem) -> dict[str, optim.RunTrace]:
    return {alg: run_algorithm(cfg, problem, alg) for alg in cfg.algorithms}


@dataclass
class SweepRow:
    algorithm: str
    value: float | int | None
    final_loss: float | None
    wf_loss: float | None
    min_loss: float | None
    aggregations: int
    diverged_at: int | None = None

    @property
    def rebound(self) -> bool:
        return self.final_loss is not None and self.final_loss > self.min_loss


def _sweep_point(cfg, problem, algorithm, gamma=None, tau=None, value=None) -> SweepRow:
    fc = cfg.fed_config(algorithm, gamma, tau)
    try:
        res = fed.run_federated(fc, problem.partition)
    except DivergenceError as exc:
        return SweepRow(algorithm, value, None, None, None, fc.K, exc.iteration)
    losses = res.trace.loss
    return SweepRow(algorithm, value, losses[-1], min(res.aggregate_losses), min(losses), fc.K)


def sweep_gamma(cfg: ExperimentConfig, problem: Problem) -> list[SweepRow]:
    if not cfg.gammas:
        raise ConfigError("sweep-gamma needs a 'gammas' list")
    rows = [_sweep_point(cfg, problem, "mfl", gamma=g, value=g) for g in cfg.gammas]
    rows.append(_sweep_point(cfg, problem, "fl", gamma=0.0, value=None))
    return rows


def sweep_tau(cfg: ExperimentConfig, problem: Problem) -> list[SweepRow]:
    if not cfg.taus:
        raise ConfigError("sweep-tau needs a 'taus' list")
    algs = [a for a in cfg.algorithms if a in ("mfl", "fl")] or ["mfl", "fl"]
    return [_sweep_point(cfg, problem, alg, tau=tau, value=tau) for tau in cfg.taus for alg in algs]


# --------------------------------------------------------------------------
# gap verification


@dataclass
class GapRow:
    k: int
    t: int
    x: int
    gap: float
    bound: float
    loss_gap: float
    loss_bound: float

    @property
    def violation(self) -> bool:
        return self.gap > self.bound + ATOL or self.loss_gap > self.loss_bound + ATOL


@dataclass
class GapReport:
    rows: list[GapRow]
    rho: float
    beta: float
    delta: float
    in_region: bool

    @property
    def violations(self) -> list[GapRow]:
        return [r for r in self.rows if r.violation]


def gap_h(x: int, eta: float, beta: float, gamma: float, delta: float) -> float:
    """Parameter-gap bound; the FL limit when ``gamma == 0``."""
    if gamma == 0:
        return 0.0 if x == 0 else analysis.h_fl(x, eta, beta, delta)
    return analysis.h(x, eta, beta, gamma, delta)


def verify_gap(cfg: ExperimentConfig, problem: Problem) -> GapReport:
    syn = problem.synthetic
    if syn is None:
        raise ConfigError("verify-gap needs a synthetic dataset (exact constants)")
    spec, part = problem.spec, problem.partition
    result = fed.run_federated(cfg.fed_config("mfl"), part, record_params=True)
    refs = optim.run_interval_reference(spec, part, result.snapshots, cfg.eta, cfg.gamma, cfg.tau, cfg.T // cfg.tau)
    ws = result.trace.params
    pts = [w for w in ws] + [w for r in refs for w in r.w]
    rho = syn.lipschitz_on(pts)
    rows = []
    for r in refs:
        start = (r.k - 1) * cfg.tau
        for j, t in enumerate(r.t):
            bound = gap_h(t - start, cfg.eta, syn.beta, cfg.gamma, syn.delta)
            rows.append(GapRow(
                k=r.k, t=t, x=t - start,
                gap=float(np.linalg.norm(ws[t] - r.w[j])),
                bound=bound,
                loss_gap=result.trace.loss[t] - r.loss[j],
                loss_bound=rho * bound,
            ))
    return GapReport(rows, rho, syn.beta, syn.delta, syn.in_region(pts))


# --------------------------------------------------------------------------
# bounds


def _w_star(cfg: ExperimentConfig, problem: Problem) -> np.ndarray:
    if problem.synthetic is not None:
        return problem.synthetic.w_star
    steps = int(cfg.bounds.get("w_star_steps", 5000))
    trace = optim.run_centralized(problem.spec, problem.train, cfg.eta, max(cfg.gamma, 0.9), steps, record_params=True)
    return trace.params[-1]


def estimate_for(cfg: ExperimentConfig, problem: Problem) -> analysis.EstimatedConstants:
    return analysis.estimate_constants(problem.spec, problem.partition,
                                       int(cfg.probes["count"]), float(cfg.probes["radius"]), cfg.seed)


def bound_params(cfg: ExperimentConfig, problem: Problem | None) -> tuple[analysis.BoundParams, dict]:
    """Assemble constants, either explicit in the config or measured from runs."""
    b = cfg.bounds
    notes: dict[str, Any] = {"source": b.get("source", "explicit")}
    if notes["source"] == "explicit":
        missing = [k for k in ("beta", "delta", "rho", "omega") if k not in b]
        if missing:
            raise ConfigError(f"explicit bounds need {', '.join(missing)}")
        theta = float(b["theta"]) if "theta" in b else math.acos(float(b.get("cos_theta", 1.0)))
        params = analysis.BoundParams(
            eta=cfg.eta, beta=float(b["beta"]), gamma=cfg.gamma, delta=float(b["delta"]),
            rho=float(b["rho"]), tau=cfg.tau, T=cfg.T, omega=float(b["omega"]),
            theta=theta, p=float(b.get("p", 1.0)), omega_fl=b.get("omega_fl"),
        )
        return params, notes
    if notes["source"] != "estimate":
        raise ConfigError("bounds.source must be 'explicit' or 'estimate'")

    spec, part = problem.spec, problem.partition
    w_star = _w_star(cfg, problem)
    mfl = fed.run_federated(cfg.fed_config("mfl"), part, record_params=True)
    fl = fed.run_federated(cfg.fed_config("fl"), part)
    refs = optim.run_interval_reference(spec, part, mfl.snapshots, cfg.eta, cfg.gamma, cfg.tau, cfg.T // cfg.tau)
    geom = analysis.measure_run_geometry(refs, w_star)
    K = cfg.T // cfg.tau
    omega_fl = analysis.omega_from_snapshots(fl.snapshots, w_star, K)
    if problem.synthetic is not None:
        syn = problem.synthetic
        beta, delta = syn.beta, syn.delta
        rho = syn.lipschitz_on([w for w in mfl.trace.params] + [w for r in refs for w in r.w])
        notes["constants"] = "exact"
    else:
        est = estimate_for(cfg, problem)
        beta, delta, rho = est.beta_hat, est.delta_hat, est.rho_hat
        notes["constants"] = "estimated"
        notes["estimate"] = est.as_dict()
    notes["geometry"] = {"theta": geom.theta, "cos_theta": geom.cos_theta, "p": geom.p, "omega": geom.omega,
                         "measured": geom.measured, "skipped": geom.skipped, "degenerate": geom.degenerate}
    notes["simulated"] = {"mfl_final_loss": mfl.trace.final_loss, "fl_final_loss": fl.trace.final_loss}
    params = analysis.BoundParams(
        eta=cfg.eta, beta=beta, gamma=cfg.gamma, delta=delta, rho=rho, tau=cfg.tau, T=cfg.T,
        omega=geom.omega, theta=geom.theta, p=geom.p, omega_fl=omega_fl,
    )
    return params, notes


def bounds_report(params: analysis.BoundParams, notes: dict | None = None) -> dict:
    """Everything the ``bounds`` command prints, as one JSON-ready dict."""
    out: dict[str, Any] = {"params": params.as_dict(), "notes": notes or {}}
    try:
        out["f1"] = analysis.f1_bound(params.T, params.tau, params)
    except DomainError as exc:
        out["f1"], out["f1_error"] = None, str(exc)
    try:
        out["f2"] = analysis.f2_bound(params.T, params.tau, params.eta, params.phi, params.rho, params.beta, params.delta)
    except DomainError as exc:
        out["f2"], out["f2_error"] = None, str(exc)
    v = analysis.acceleration_check(params)
    out["acceleration"] = {"omega_alpha": v.omega_alpha, "eta_phi": v.eta_phi,
                           "gamma_ceiling": v.gamma_ceiling, "accelerated": v.accelerated}
    out["h"] = [gap_h(x, params.eta, params.beta, params.gamma, params.delta) for x in range(params.tau + 1)]
    if params.tau == 1:
        out["note"] = "tau = 1: h(1) = 0, zero gap; f1 = 1/(T omega alpha)"
    return out
