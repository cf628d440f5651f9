"""
Aggregation frequency
=====================

Larger tau means fewer aggregations. With a small step size the local
models drift little, so MFL stays ahead of FL at every tau.
"""
from pathlib import Path

from mfl import experiments
from mfl.experiments import ExperimentConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

cfg = ExperimentConfig.load(CONFIGS / "tau_sweep.json")
rows = experiments.sweep_tau(cfg, experiments.build_problem(cfg))
by = {(r.algorithm, r.value): r.final_loss for r in rows}

print(" tau   aggregations   MFL          FL")
for tau in cfg.taus:
    print(f"{tau:>4}   {cfg.T // tau:>12}   {by['mfl', tau]:.7f}   {by['fl', tau]:.7f}")
