from pathlib import Path

import pytest

from mfl import data

ROOT = Path(__file__).resolve().parents[1]
MNIST = ROOT / "data" / "mnist"
TRAIN = (MNIST / "train-images-idx3-ubyte.gz", MNIST / "train-labels-idx1-ubyte.gz")
TEST = (MNIST / "t10k-images-idx3-ubyte.gz", MNIST / "t10k-labels-idx1-ubyte.gz")


def _need_mnist():
    if not all(p.exists() for p in TRAIN + TEST):
        pytest.skip("bundled MNIST IDX files not found under data/mnist")


@pytest.fixture(scope="session")
def mnist_svm():
    _need_mnist()
    return data.load_mnist(*TRAIN, 5000, "svm_linear", 0), data.load_mnist(*TEST, 5000, "svm_linear", 0)


@pytest.fixture(scope="session")
def mnist_logistic():
    _need_mnist()
    return data.load_mnist(*TRAIN, 5000, "logistic", 0), data.load_mnist(*TEST, 5000, "logistic", 0)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(1234)


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE.values():
            terminalreporter.write_line(line)
