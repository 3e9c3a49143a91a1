import numpy as np
import pytest

from lpsvm import Dataset, NormParam
from lpsvm.feature_maps import TransformSpec, apply_transform

# six labelled points in the plane, three per class, separable by a conic
TOY_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [1, -1], [-1, 1]], dtype=float)
TOY_Y = np.array([1, 1, 1, -1, -1, -1], dtype=float)


@pytest.fixture
def toy():
    return Dataset(TOY_X, TOY_Y)


@pytest.fixture
def toy_quadratic(toy):
    """The toy points under (x1^2, 2^(1/3) x1 x2, x2^2)."""
    return apply_transform(toy, TransformSpec.quadratic(3))


@pytest.fixture
def cubic():
    return NormParam(3, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_instance(rng, n_max=8, d_max=3):
    n = int(rng.integers(3, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    X = rng.normal(size=(n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    y[0], y[1] = 1.0, -1.0
    return Dataset(X, y)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
