"""
MFL, FL and centralized MGD on MNIST
====================================

Four nodes each hold a quarter of a 5,000-image MNIST subset. We train
a linear SVM (even digits vs odd) three ways and compare the global loss.
"""
from pathlib import Path

from mfl import experiments
from mfl.experiments import ExperimentConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# %%
# The config fixes eta=0.002, gamma=0.5, tau=4, T=1000 and lambda=0.3.
cfg = ExperimentConfig.load(CONFIGS / "convergence_svm.json")
problem = experiments.build_problem(cfg)
print("nodes:", problem.partition.sizes, "features:", problem.partition.dim)

# %%
# Each trace holds the loss of the (virtual) global aggregate at every t.
traces = experiments.run_all(cfg, problem)
for t in (0, 10, 100, 500, 1000):
    row = "  ".join(f"{alg} {traces[alg].loss[t]:.5f}" for alg in ("mgd", "mfl", "fl"))
    print(f"t={t:>4}  {row}")

# %%
# Momentum closes almost all of the gap to the centralized run, plain FL lags.
for alg, tr in traces.items():
    print(f"{alg:>4}: final loss {tr.final_loss:.6f}  test accuracy {tr.accuracy[-1]:.4f}")

# %%
# The same ordering shows up for the unregularized models.
for name in ("convergence_linreg", "convergence_logreg"):
    c = ExperimentConfig.load(CONFIGS / f"{name}.json")
    tr = experiments.run_all(c, experiments.build_problem(c))
    print(c.model.kind, {alg: round(t.final_loss, 6) for alg, t in tr.items()})
