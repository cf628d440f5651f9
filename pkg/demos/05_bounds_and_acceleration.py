"""
Convergence bounds and the acceleration condition
=================================================

Combine exact synthetic constants with the angle and norm ratio measured
on the run, then compare the MFL bound f1 against the FL bound f2.
"""
from pathlib import Path

from mfl import analysis, experiments
from mfl.experiments import ExperimentConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

cfg = ExperimentConfig.load(CONFIGS / "synthetic_bounds.json")
problem = experiments.build_problem(cfg)
params, notes = experiments.bound_params(cfg, problem)
print("measured geometry:", notes["geometry"])

# %%
f1 = analysis.f1_bound(cfg.T, cfg.tau, params)
f2 = analysis.f2_bound(cfg.T, cfg.tau, params.eta, params.phi, params.rho, params.beta, params.delta)
v = analysis.acceleration_check(params)
print(f"f1={f1:.6f}  f2={f2:.6f}")
print(f"omega*alpha={v.omega_alpha:.6g}  eta*phi={v.eta_phi:.6g}  gamma ceiling={v.gamma_ceiling:.1f}")
print("simulated final losses:", notes["simulated"])

# %%
# With eta this small the gamma ceiling is far above 1, so every gamma in
# (0, 1) accelerates. As gamma shrinks the two bounds meet.
for g in (0.5, 0.1, 1e-3, 1e-6):
    p = analysis.BoundParams(**{**params.__dict__, "gamma": g})
    a = analysis.f1_bound(cfg.T, cfg.tau, p)
    print(f"gamma={g:<6} f1={a:.6f}  f1/f2={a / f2:.6f}")

# %%
# Longer horizons approach a floor set by the interval gap.
print("T -> inf limit:", analysis.f1_limit(cfg.tau, params))
