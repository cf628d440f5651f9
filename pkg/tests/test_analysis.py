import math

import numpy as np
import pytest

from mfl import analysis, data, fed, optim
from mfl.analysis import BoundParams
from mfl.core import DomainError
from mfl.models import ModelSpec

QUAD = ModelSpec("quadratic")
GAMMAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
ETABETAS = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]

# 30-digit mpmath evaluation of the defining sums at eta=0.1, beta=1, gamma=0.5, delta=1
A_REF = 2.3483314773547882771
B_REF = 0.85166852264521172288
E_REF = 9.0089186286863657703
F_REF = 0.99108137131363422973
H_REF = [0.0, 0.0, 0.01, 0.041, 0.1031, 0.20571, 0.358211, 0.5705951, 0.85400291, 1.221185231, 1.6869339771]


def test_roots_reference_values():
    A, B = analysis.solve_AB(0.1, 1.0, 0.5)
    assert A == pytest.approx(A_REF, rel=1e-14)
    assert B == pytest.approx(B_REF, rel=1e-14)


def test_ef_reference_values():
    E, F = analysis.coeffs_EF(*analysis.solve_AB(0.1, 1.0, 0.5), 0.5)
    assert E == pytest.approx(E_REF, rel=1e-13)
    assert F == pytest.approx(F_REF, rel=1e-13)
    assert E + F == pytest.approx(10.0, abs=1e-10)


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("eb", ETABETAS)
def test_root_identities(gamma, eb):
    eta, beta = eb / 2.0, 2.0
    A, B = analysis.solve_AB(eta, beta, gamma)
    assert abs(A * B - 1 / gamma) <= 1e-12 * (1 / gamma)
    assert abs(A + B - (1 + gamma + eb) / gamma) <= 1e-12 * (A + B)
    assert gamma * A > 1 > gamma * B
    C, D = analysis.coeffs_CD(A, B)
    assert abs(C + D - 1) <= 1e-12
    E, F = analysis.coeffs_EF(A, B, gamma)
    assert E > 0 and F > 0
    assert abs(E + F - 1 / eb) <= 1e-12 * (1 / eb)


def test_roots_distinct_near_unit_gamma():
    A, B = analysis.solve_AB(0.001, 1.0, 0.999999)
    assert A > B and math.isfinite(A)


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.5), (0.1, 0.0, 0.5), (0.1, 1.0, 0.0), (0.1, 1.0, 1.0)])
def test_roots_domain(args):
    with pytest.raises(DomainError):
        analysis.solve_AB(*args)


def test_h_reference_values():
    for x, ref in enumerate(H_REF):
        got = analysis.h(x, 0.1, 1.0, 0.5, 1.0)
        if ref == 0:
            assert got == 0.0
        else:
            assert got == pytest.approx(ref, rel=1e-12)


def test_h_zero_and_one_exact():
    for gamma in GAMMAS:
        assert analysis.h(0, 0.01, 3.0, gamma, 2.0) == 0.0
        assert analysis.h(1, 0.01, 3.0, gamma, 2.0) == 0.0


@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("eb", [0.01, 0.05, 0.1, 0.3])
def test_h_matches_oracle(gamma, eb):
    for x in range(51):
        closed = analysis.h(x, eb, 1.0, gamma, 1.0)
        brute = analysis.h_oracle(x, eb, 1.0, gamma, 1.0)
        assert abs(closed - brute) <= 1e-10 * abs(brute)


def test_oracle_reference_values():
    for x, ref in enumerate(H_REF):
        assert analysis.h_oracle(x, 0.1, 1.0, 0.5, 1.0) == pytest.approx(ref, rel=1e-12, abs=0)


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("eb", ETABETAS)
def test_h_non_decreasing(gamma, eb):
    vals = [analysis.h(x, eb, 1.0, gamma, 1.0) for x in range(51)]
    assert all(b >= a for a, b in zip(vals[1:], vals[2:]))
    assert all(b > a for a, b in zip(vals[1:], vals[2:]))


def test_h_scales_with_delta():
    assert analysis.h(7, 0.1, 1.0, 0.5, 0.0) == 0.0
    assert analysis.h(7, 0.1, 1.0, 0.5, 3.0) == pytest.approx(3 * analysis.h(7, 0.1, 1.0, 0.5, 1.0), rel=1e-14)


def test_h_textbook_agrees_where_well_conditioned():
    assert analysis.h_textbook(6, 0.1, 1.0, 0.5, 1.0) == pytest.approx(H_REF[6], rel=1e-9)


def test_h_fl_values():
    assert analysis.h_fl(4, 0.1, 1.0, 1.0) == pytest.approx(0.0641, rel=1e-12)
    assert analysis.h_fl(1, 0.1, 1.0, 1.0) == 0.0
    assert analysis.h_fl(9, 0.1, 1.0, 0.0) == 0.0


def test_h_vanishes_with_eta():
    vals = [analysis.h(4, eta, 1.0, 0.5, 1.0) for eta in (1e-2, 1e-4, 1e-6)]
    for got, ref in zip(vals, [9.80510e-4, 9.75055e-8, 9.750005e-12]):
        assert got == pytest.approx(ref, rel=1e-5)
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] / vals[0] <= 1e-3


def test_h_tends_to_h_fl_as_gamma_vanishes():
    got = analysis.h(4, 0.1, 1.0, 1e-6, 1.0)
    ref = analysis.h_fl(4, 0.1, 1.0, 1.0)
    assert abs(got - ref) / ref <= 1e-3


@pytest.mark.parametrize("gamma", [0.2, 0.5, 0.9])
@pytest.mark.parametrize("eb", [0.01, 0.1, 0.5])
def test_lemma4_recurrence(gamma, eb):
    eta, beta, delta = eb, 1.0, 1.0
    A, B = analysis.solve_AB(eta, beta, gamma)
    C, D = analysis.coeffs_CD(A, B)
    a = [delta / beta * (C * A**t + D * B**t) for t in range(31)]
    for t in range(1, 31):
        lhs = a[t - 1] + eta * beta * sum(a[:t])
        assert abs(lhs - gamma * a[t]) <= 1e-10 * abs(gamma * a[t])


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("eb", [0.01, 0.1, 0.5])
def test_momentum_growth_dominates_gd_growth(gamma, eb):
    A, B = analysis.solve_AB(eb, 1.0, gamma)
    C, D = analysis.coeffs_CD(A, B)
    for i in range(31):
        lhs = C * (gamma * A) ** i + D * (gamma * B) ** i
        assert lhs >= (1 + eb) ** i * (1 - 1e-14)


def test_gap_bound():
    assert analysis.gap_bound(8, 3, 4, 2.0, 0.1, 1.0, 0.5, 1.0) == 0.0
    assert analysis.gap_bound(9, 3, 4, 2.0, 0.1, 1.0, 0.5, 1.0) == 0.0
    assert analysis.gap_bound(12, 3, 4, 2.0, 0.1, 1.0, 0.5, 1.0) == pytest.approx(2 * H_REF[4], rel=1e-12)
    with pytest.raises(DomainError):
        analysis.gap_bound(13, 3, 4, 2.0, 0.1, 1.0, 0.5, 1.0)


def params(**kw):
    base = dict(eta=0.01, beta=1.0, gamma=0.5, delta=1.0, rho=1.0, tau=4, T=100, omega=1.0)
    base.update(kw)
    return BoundParams(**base)


def test_alpha_formula():
    p = params(eta=0.1, gamma=0.5, theta=0.3, p=1.5)
    ref = 0.1 * 0.95 + 0.1 * 0.5 * 0.9 * math.cos(0.3) - 0.01 * 0.25 * 2.25 / 2
    assert p.alpha == pytest.approx(ref, rel=1e-14)
    assert params(gamma=0.0).alpha == pytest.approx(0.01 * (1 - 0.005), rel=1e-15)


def test_f1_tau_one_exact():
    p = params(tau=1)
    assert analysis.f1_bound(100, 1, p) == 1.0 / (100 * p.omega * p.alpha)


def test_f1_closed_form():
    p = params()
    c = p.omega * p.alpha
    rh = p.rho * analysis.h(4, 0.01, 1.0, 0.5, 1.0)
    ref = 1 / (200 * c) + math.sqrt(1 / (4 * 100**2 * c**2) + rh / (c * 4)) + rh
    assert analysis.f1_bound(100, 4, p) == pytest.approx(ref, rel=1e-14)


def test_f1_limit_in_T():
    p = params()
    lim = analysis.f1_limit(4, p)
    assert analysis.f1_bound(10**12, 4, p) == pytest.approx(lim, rel=1e-6)
    assert lim > 0


def test_f1_equals_f2_as_gamma_vanishes():
    p = params(gamma=1e-8)
    f1 = analysis.f1_bound(100, 4, p)
    f2 = analysis.f2_bound(100, 4, p.eta, p.phi, p.rho, p.beta, p.delta)
    assert abs(f1 - f2) / f2 <= 1e-4
    p0 = params(gamma=0.0)
    assert analysis.f1_bound(100, 4, p0) == pytest.approx(analysis.f2_bound(100, 4, 0.01, p0.phi, 1.0, 1.0, 1.0), rel=1e-12)


def test_f2_tau_one_and_T_scaling():
    a = analysis.f2_bound(100, 1, 0.01, 0.9, 1.0, 1.0, 1.0)
    assert a == 1.0 / (0.01 * 0.9 * 100)
    assert analysis.f2_bound(200, 1, 0.01, 0.9, 1.0, 1.0, 1.0) == pytest.approx(a / 2, rel=1e-15)


@pytest.mark.parametrize(
    "kw, needle",
    [
        (dict(theta=2.0), "cos(theta)"),
        (dict(eta=2.0), "eta*beta"),
        (dict(gamma=1.0), "gamma"),
        (dict(omega=0.0), "ω"),
        (dict(eta=0.9, gamma=0.9, p=10.0), "α"),
    ],
)
def test_f1_names_failed_hypothesis(kw, needle):
    with pytest.raises(DomainError, match=needle.replace("(", r"\(").replace(")", r"\)").replace("*", r"\*")):
        analysis.f1_bound(100, 4, params(**kw))


def test_f2_domain():
    with pytest.raises(DomainError):
        analysis.f2_bound(100, 4, 0.01, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        analysis.f2_bound(100, 4, 2.0, 1.0, 1.0, 1.0, 1.0)


def test_acceleration_zero_gamma_is_tie():
    v = analysis.acceleration_check(params(gamma=0.0))
    assert v.omega_alpha == v.eta_phi
    assert not v.accelerated


def test_acceleration_small_eta_ceiling_above_one():
    v = analysis.acceleration_check(params(eta=0.002, beta=1.0, gamma=0.5))
    assert v.gamma_ceiling > 1
    assert v.accelerated
    assert v.gamma_ceiling == pytest.approx(2 * (1 - 0.002) / 0.002, rel=1e-14)


def test_acceleration_matches_ceiling_test():
    for gamma in (0.1, 0.5, 0.9):
        p = params(eta=0.5, beta=1.0, gamma=gamma, p=3.0, theta=0.5)
        v = analysis.acceleration_check(p)
        assert v.accelerated == (gamma < v.gamma_ceiling)


def test_f1_below_f2_in_acceleration_regime():
    syn = data.make_synthetic(5, 4, 0, 1.0)
    p = params(eta=0.002, beta=syn.beta, delta=syn.delta, rho=3.0, tau=4, T=1000, omega=1.0)
    f1 = analysis.f1_bound(1000, 4, p)
    f2 = analysis.f2_bound(1000, 4, p.eta, p.phi, p.rho, p.beta, p.delta)
    assert f1 < f2


def test_estimate_unit_curvature_beta():
    syn = data.make_synthetic(4, 3, 0, 1.0)
    est = analysis.estimate_constants(QUAD, syn.partition, probes=12, seed=1)
    assert abs(est.beta_hat - 1.0) <= 1e-9


def test_estimate_zero_spread_delta():
    syn = data.make_synthetic(4, 3, 0, 0.0)
    # zero up to rounding in the size-weighted mean
    assert analysis.estimate_constants(QUAD, syn.partition).delta_hat <= 1e-14


def test_estimate_two_opposite_centers():
    syn = data.synthetic_from_centers(np.array([[1.0], [-1.0]]), [5, 5])
    est = analysis.estimate_constants(QUAD, syn.partition, probes=8)
    np.testing.assert_allclose(est.delta_i_hat, [1.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(est.delta_i_hat, syn.delta_i, atol=1e-9)


def test_estimate_delta_is_size_weighted():
    syn = data.make_synthetic(3, 3, 2, 1.0, curvature_spread=0.3)
    est = analysis.estimate_constants(QUAD, syn.partition, probes=10)
    sizes = np.array(syn.partition.sizes, dtype=float)
    assert est.delta_hat == pytest.approx(float(np.dot(sizes, est.delta_i_hat) / sizes.sum()), rel=1e-14)


def test_estimates_are_lower_bounds():
    syn = data.make_synthetic(3, 4, 5, 1.0, curvature_spread=0.5)
    est = analysis.estimate_constants(QUAD, syn.partition, probes=16, radius=1.0)
    assert est.beta_hat <= syn.beta + 1e-12
    assert est.delta_hat <= syn.delta + 1e-12


def test_estimate_needs_probes():
    syn = data.make_synthetic(2, 2, 0, 1.0)
    with pytest.raises(DomainError):
        analysis.estimate_constants(QUAD, syn.partition, probes=1)


def _reference(syn, gamma, tau, T, eta=0.1):
    cfg = fed.FedConfig(eta, gamma, tau, T, syn.partition.N, QUAD)
    res = fed.run_federated(cfg, syn.partition)
    return res, optim.run_interval_reference(QUAD, syn.partition, res.snapshots, eta, gamma, tau)


def test_geometry_gd_is_collinear():
    syn = data.make_synthetic(3, 4, 0, 1.0)
    _, ref = _reference(syn, 0.0, 1, 20)
    geo = analysis.measure_run_geometry(ref, syn.w_star)
    assert geo.theta == pytest.approx(0.0, abs=1e-6)
    assert geo.skipped == 1  # first instant of the first interval has d = 0


def test_geometry_synthetic_momentum_run():
    syn = data.make_synthetic(5, 4, 0, 1.0, curvature_spread=0.5)
    # small step: with eta = 0.1 the reference overshoots and d turns against the gradient
    res, ref = _reference(syn, 0.5, 4, 1000, eta=0.002)
    geo = analysis.measure_run_geometry(ref, syn.w_star)
    assert geo.cos_theta >= 0
    assert geo.p > 0 and geo.measured > 0
    assert geo.omega == pytest.approx(analysis.omega_from_snapshots(res.snapshots, syn.w_star), rel=1e-14)


def test_geometry_all_momenta_zero_flags():
    syn = data.make_synthetic(2, 2, 0, 1.0)
    ref = optim.run_interval_reference(QUAD, syn.partition, [(0, syn.w_star, np.zeros(2))], 0.1, 0.5, 3)
    geo = analysis.measure_run_geometry(ref, syn.w_star + 1.0)
    assert geo.degenerate and geo.theta == 0.0


def test_bound_params_dict_has_roots():
    d = params().as_dict()
    assert d["A"] * d["B"] == pytest.approx(2.0, rel=1e-12)
    assert "alpha" in d and "phi" in d
