import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tfaml import dataset  # noqa: E402


def make_dataset(X, y, names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"F{i}" for i in range(X.shape[1])]
    ids = [f"C{i:05d}" for i in range(len(y))]
    return dataset.LabeledDataset(ids, X, np.asarray(y), list(names), dict.fromkeys(names, "TF"))


def separable(n, seed, d=4, flip=False):
    """Two Gaussian blobs 4 sd apart along the first axis, plus noise columns."""
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % 2).astype(int)
    X = rng.normal(size=(n, d))
    X[:, 0] += 4.0 * y
    if flip:
        y = rng.permutation(y)
    return make_dataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
