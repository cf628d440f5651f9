"""Closed-form convergence bounds for MFL/FL and the estimators that feed them.

Notation follows the usual MFL analysis: step size ``eta``, smoothness
``beta``, momentum factor ``gamma``, average gradient divergence ``delta``,
loss Lipschitz constant ``rho``, aggregation period ``tau``.  ``A > B`` are the
roots of ``gamma x^2 - (1 + gamma + eta beta) x + 1 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import models
from .core import DomainError
from .data import Partition
from .models import ModelSpec
from .optim import IntervalTrace


def _check_hparams(eta: float, beta: float, gamma: float, delta: float = 0.0):
    if not eta > 0:
        raise DomainError("eta must be positive")
    if not beta > 0:
        raise DomainError("beta must be positive")
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    if delta < 0:
        raise DomainError("delta must be nonnegative")


def solve_AB(eta: float, beta: float, gamma: float) -> tuple[float, float]:
    _check_hparams(eta, beta, gamma)
    s = 1.0 + gamma + eta * beta
    disc = s * s - 4.0 * gamma
    if not disc > 0:
        raise DomainError(f"non-positive discriminant {disc}")
    A = (s + math.sqrt(disc)) / (2.0 * gamma)
    # smaller root via Vieta (AB = 1/gamma) avoids cancellation
    return A, 1.0 / (gamma * A)


def coeffs_CD(A: float, B: float) -> tuple[float, float]:
    return (A - 1.0) / (A - B), (1.0 - B) / (A - B)


def coeffs_EF(A: float, B: float, gamma: float) -> tuple[float, float]:
    E = A / ((A - B) * (gamma * A - 1.0))
    F = B / ((A - B) * (1.0 - gamma * B))
    return E, F


def _momentum_sum(x: int, gamma: float) -> float:
    # sum_{i=1}^{x} (1 - gamma^i) / (1 - gamma)
    return (gamma * math.expm1(x * math.log(gamma)) - (gamma - 1.0) * x) / (gamma - 1.0) ** 2


def h(x: int, eta: float, beta: float, gamma: float, delta: float) -> float:
    """Bound on ``||w(t) - w_[k](t)||`` after ``x`` local steps since aggregation.

    Uses ``E + F = 1/(eta beta)`` to write the bracket as
    ``E((gamma A)^x - 1) + F((gamma B)^x - 1) - sum``, with ``expm1`` for the
    powers; the textbook form loses most digits once ``eta beta`` is small.
    """
    _check_hparams(eta, beta, gamma, delta)
    if x < 0 or int(x) != x:
        raise DomainError("x must be a nonnegative integer")
    x = int(x)
    if x <= 1 or delta == 0:
        return 0.0
    A, B = solve_AB(eta, beta, gamma)
    E, F = coeffs_EF(A, B, gamma)
    bracket = (
        E * math.expm1(x * math.log(gamma * A))
        + F * math.expm1(x * math.log(gamma * B))
        - _momentum_sum(x, gamma)
    )
    return max(eta * delta * bracket, 0.0)


def h_textbook(x: int, eta: float, beta: float, gamma: float, delta: float) -> float:
    """``h`` evaluated literally as ``eta delta [E (gA)^x + F (gB)^x - 1/(eta beta) - ...]``."""
    _check_hparams(eta, beta, gamma, delta)
    A, B = solve_AB(eta, beta, gamma)
    E, F = coeffs_EF(A, B, gamma)
    return eta * delta * (
        E * (gamma * A) ** x
        + F * (gamma * B) ** x
        - 1.0 / (eta * beta)
        - (gamma * (gamma**x - 1.0) - (gamma - 1.0) * x) / (gamma - 1.0) ** 2
    )


def _momentum_gap_growth(t: int, A: float, B: float, gamma: float) -> float:
    # p(t) = gamma^t (C A^t + D B^t) - 1; p(0) = C + D - 1 is exactly 0
    if t == 0:
        return 0.0
    C, D = coeffs_CD(A, B)
    return C * (gamma * A) ** t + D * (gamma * B) ** t - 1.0


def _node_gap_bound(t: int, eta: float, beta: float, gamma: float, delta_i: float) -> float:
    # per-node bound on ||w_i(t) - w_[k](t)||: (delta_i / beta) p(t)
    A, B = solve_AB(eta, beta, gamma)
    return delta_i / beta * _momentum_gap_growth(t, A, B, gamma)


def h_oracle(x: int, eta: float, beta: float, gamma: float, delta: float) -> float:
    """Brute-force ``h``: accumulate the momentum-gap recursion term by term.

    ``||d(t) - d_[k](t)|| <= sum_j gamma^(i-1-j) beta f(j)`` and the parameter
    gap adds ``eta`` times that at each step, with ``beta f(j) = delta p(j)``.
    """
    _check_hparams(eta, beta, gamma, delta)
    if x < 0 or int(x) != x:
        raise DomainError("x must be a nonnegative integer")
    total = 0.0
    for i in range(1, int(x) + 1):
        d_gap = 0.0
        for j in range(i):
            d_gap += gamma ** (i - 1 - j) * beta * _node_gap_bound(j, eta, beta, gamma, delta)
        total += eta * d_gap
    return total


def h_fl(tau: int, eta: float, beta: float, delta: float) -> float:
    if not (eta > 0 and beta > 0):
        raise DomainError("eta and beta must be positive")
    if delta < 0 or tau < 1:
        raise DomainError("need delta >= 0 and tau >= 1")
    return delta / beta * math.expm1(tau * math.log1p(eta * beta)) - eta * delta * tau


def gap_bound(t: int, k: int, tau: int, rho: float, eta: float, beta: float, gamma: float, delta: float) -> float:
    """``rho * h(t - (k-1) tau)`` for ``t`` inside interval ``[k]``."""
    start = (k - 1) * tau
    if not start <= t <= k * tau:
        raise DomainError(f"t={t} outside interval [{start}, {k * tau}]")
    return rho * h(t - start, eta, beta, gamma, delta)


# --------------------------------------------------------------------------
# global bounds


@dataclass
class BoundParams:
    eta: float
    beta: float
    gamma: float
    delta: float
    rho: float
    tau: int
    T: int
    omega: float
    theta: float = 0.0  # radians
    p: float = 1.0
    omega_fl: float | None = None  # defaults to omega

    @property
    def cos_theta(self) -> float:
        return math.cos(self.theta)

    @property
    def phi(self) -> float:
        om = self.omega if self.omega_fl is None else self.omega_fl
        return om * (1.0 - self.eta * self.beta / 2.0)

    @property
    def alpha(self) -> float:
        return alpha(self.eta, self.beta, self.gamma, self.cos_theta, self.p)

    def roots(self) -> dict:
        if not 0 < self.gamma < 1:
            return {}
        A, B = solve_AB(self.eta, self.beta, self.gamma)
        C, D = coeffs_CD(A, B)
        E, F = coeffs_EF(A, B, self.gamma)
        return {"A": A, "B": B, "C": C, "D": D, "E": E, "F": F}

    def as_dict(self) -> dict:
        out = asdict(self)
        out.update(cos_theta=self.cos_theta, phi=self.phi, alpha=self.alpha)
        out.update(self.roots())
        return out


def _gd_part(eta: float, beta: float) -> float:
    return eta * (1.0 - beta * eta / 2.0)


def alpha(eta: float, beta: float, gamma: float, cos_theta: float, p: float) -> float:
    return (
        _gd_part(eta, beta)
        + eta * gamma * (1.0 - beta * eta) * cos_theta
        - beta * eta**2 * gamma**2 * p**2 / 2.0
    )


def h_tau(params: BoundParams) -> float:
    """``h(tau)``; at ``gamma = 0`` its limit, the FL gap ``h_fl(tau)``."""
    if params.gamma == 0:
        return h_fl(params.tau, params.eta, params.beta, params.delta)
    return h(params.tau, params.eta, params.beta, params.gamma, params.delta)


def _bound(c: float, T: int, tau: int, rho_h: float) -> float:
    # 1/(2Tc) + sqrt(1/(4T^2c^2) + rho h / (c tau)) + rho h
    lead = 1.0 / (2.0 * T * c)
    return lead + math.sqrt(lead * lead + rho_h / (c * tau)) + rho_h


def f1_bound(T: int, tau: int, params: BoundParams) -> float:
    """Upper bound on ``F(w_f) - F(w*)`` for MFL."""
    if not params.cos_theta >= 0:
        raise DomainError("cos(theta) < 0")
    if not 0 < params.eta * params.beta < 1:
        raise DomainError("eta*beta outside (0, 1)")
    if not 0 <= params.gamma < 1:
        raise DomainError("gamma outside [0, 1)")
    a = params.alpha
    if not a > 0:
        raise DomainError("α ≤ 0")
    if not params.omega > 0:
        raise DomainError("ω ≤ 0")
    if T < 1 or tau < 1:
        raise DomainError("T and tau must be >= 1")
    rho_h = params.rho * h_tau(BoundParams(**{**asdict(params), "tau": tau}))
    if tau == 1:
        return 1.0 / (T * params.omega * a)
    return _bound(params.omega * a, T, tau, rho_h)


def f2_bound(T: int, tau: int, eta: float, phi: float, rho: float, beta: float, delta: float) -> float:
    """Upper bound on ``F(w_f) - F(w*)`` for FL."""
    if not 0 < eta * beta < 1:
        raise DomainError("eta*beta outside (0, 1)")
    if not phi > 0:
        raise DomainError("φ ≤ 0")
    if T < 1 or tau < 1:
        raise DomainError("T and tau must be >= 1")
    if tau == 1:
        return 1.0 / (eta * phi * T)
    return _bound(eta * phi, T, tau, rho * h_fl(tau, eta, beta, delta))


def f1_limit(tau: int, params: BoundParams) -> float:
    """``lim_{T->inf} f1``: ``sqrt(rho h / (omega alpha tau)) + rho h``."""
    rho_h = params.rho * h_tau(BoundParams(**{**asdict(params), "tau": tau}))
    return math.sqrt(rho_h / (params.omega * params.alpha * tau)) + rho_h


@dataclass
class AccelerationVerdict:
    omega_alpha: float
    eta_phi: float
    gamma_ceiling: float
    accelerated: bool


def acceleration_check(params: BoundParams) -> AccelerationVerdict:
    """Compare ``omega alpha`` against ``eta phi`` (MFL faster iff larger)."""
    base = _gd_part(params.eta, params.beta)
    momentum = (
        params.eta * params.gamma * (1.0 - params.beta * params.eta) * params.cos_theta
        - params.beta * params.eta**2 * params.gamma**2 * params.p**2 / 2.0
    )
    om_fl = params.omega if params.omega_fl is None else params.omega_fl
    omega_alpha = params.omega * (base + momentum)
    eta_phi = om_fl * base
    denom = params.beta * params.eta * params.p**2
    ceiling = math.inf if denom == 0 else 2.0 * (1.0 - params.beta * params.eta) * params.cos_theta / denom
    return AccelerationVerdict(
        omega_alpha=omega_alpha,
        eta_phi=eta_phi,
        gamma_ceiling=ceiling,
        accelerated=bool(omega_alpha > eta_phi and 0 < params.gamma < 1),
    )


# --------------------------------------------------------------------------
# estimators


@dataclass
class EstimatedConstants:
    beta_hat: float
    rho_hat: float
    delta_i_hat: list[float]
    delta_hat: float
    probes: int
    seed: int
    radius: float
    skipped_pairs: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def probe_points(dim: int, probes: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((probes, dim))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    return direction * (radius * rng.random((probes, 1)) ** (1.0 / dim))


def estimate_constants(spec: ModelSpec, partition: Partition, probes: int = 16, radius: float = 1.0, seed: int = 0) -> EstimatedConstants:
    """Probe-based lower estimates of ``beta``, ``rho`` and ``delta_i``.

    Every quantity is a max over finitely many probes, so it can only
    under-estimate the true supremum.
    """
    if probes < 2:
        raise DomainError("need at least two probes")
    pts = probe_points(partition.dim, probes, radius, seed)
    sizes = partition.sizes
    grads = np.array([[models.gradient(spec, w, D) for w in pts] for D in partition.node_data])
    losses = np.array([[models.loss(spec, w, D) for w in pts] for D in partition.node_data])
    wts = np.asarray(sizes, dtype=np.float64) / partition.total
    global_grads = np.tensordot(wts, grads, axes=1)

    beta_hat = rho_hat = 0.0
    skipped = 0
    for a in range(probes):
        for b in range(a + 1, probes):
            dist = float(np.linalg.norm(pts[a] - pts[b]))
            if dist == 0:
                skipped += 1
                continue
            for i in range(partition.N):
                beta_hat = max(beta_hat, float(np.linalg.norm(grads[i, a] - grads[i, b])) / dist)
                rho_hat = max(rho_hat, abs(losses[i, a] - losses[i, b]) / dist)
    if skipped == probes * (probes - 1) // 2:
        raise DomainError("all probe pairs are degenerate")
    delta_i = [float(np.linalg.norm(global_grads - grads[i], axis=1).max()) for i in range(partition.N)]
    return EstimatedConstants(
        beta_hat=beta_hat,
        rho_hat=rho_hat,
        delta_i_hat=delta_i,
        delta_hat=float(np.dot(wts, delta_i)),
        probes=probes,
        seed=seed,
        radius=radius,
        skipped_pairs=skipped,
    )


@dataclass
class RunGeometry:
    theta: float
    cos_theta: float
    p: float
    omega: float
    measured: int = 0
    skipped: int = 0
    degenerate: bool = False  # every momentum was zero; theta reported as 0
    per_interval_omega: list[float] = field(default_factory=list)


def measure_run_geometry(reference: list[IntervalTrace], w_star) -> RunGeometry:
    """Angle and norm ratio between ``grad F(w_[k](t))`` and ``d_[k](t)``, plus omega.

    Instants with a zero momentum or zero gradient have no defined angle
    and are skipped.
    """
    w_star = np.asarray(w_star, dtype=np.float64)
    theta, p = 0.0, 0.0
    measured = skipped = 0
    omegas = []
    for rec in reference:
        dist2 = float(np.sum((rec.w[0] - w_star) ** 2))
        omegas.append(math.inf if dist2 == 0 else 1.0 / dist2)
        for g, d in zip(rec.grad, rec.d):
            gn, dn = float(np.linalg.norm(g)), float(np.linalg.norm(d))
            if gn == 0 or dn == 0:
                skipped += 1
                continue
            cos = float(np.clip(g @ d / (gn * dn), -1.0, 1.0))
            theta = max(theta, math.acos(cos))
            p = max(p, dn / gn)
            measured += 1
    return RunGeometry(
        theta=theta,
        cos_theta=math.cos(theta),
        p=p,
        omega=min(omegas) if omegas else math.nan,
        measured=measured,
        skipped=skipped,
        degenerate=measured == 0,
        per_interval_omega=omegas,
    )


def omega_from_snapshots(snapshots, w_star, K: int | None = None) -> float:
    """``min_k 1/||w((k-1) tau) - w*||^2`` over the aggregates that start an interval."""
    w_star = np.asarray(w_star, dtype=np.float64)
    ks = sorted(int(k) for k, _, _ in snapshots)
    last = (max(ks) if K is None else K) - 1
    vals = [1.0 / float(np.sum((np.asarray(w) - w_star) ** 2)) for k, w, _ in snapshots if int(k) <= last]
    return min(vals)
