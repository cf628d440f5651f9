"""
Estimating smoothness and divergence on MNIST
=============================================

For real data the constants beta, rho and delta are not known. We probe
the node losses at random points in a ball around the origin. Every
number below is a max over finitely many probes, so it under-estimates
the true supremum.
"""
from pathlib import Path

from mfl import analysis, data
from mfl.models import ModelSpec

MNIST = Path(__file__).resolve().parents[1] / "data" / "mnist"
train = data.load_mnist(MNIST / "train-images-idx3-ubyte.gz", MNIST / "train-labels-idx1-ubyte.gz",
                        5000, "svm_linear")
part = data.partition_uniform(train, 4, seed=0)

for probes in (4, 16, 64):
    est = analysis.estimate_constants(ModelSpec("svm", 0.3), part, probes=probes, radius=1.0, seed=0)
    print(f"{probes:>3} probes: beta~{est.beta_hat:.4f} rho~{est.rho_hat:.4f} delta~{est.delta_hat:.4f}")

# %%
# Each probe count draws a fresh point set, so the numbers need not be
# monotone in the count. They do settle once the ball is well covered.
