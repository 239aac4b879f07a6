import numpy as np
import pytest

from citypower.dataset import Dataset
from citypower.schema import FeatureDescriptor, FeatureSchema


def make_schema(n_features=3, target="consumption"):
    feats = [FeatureDescriptor(f"f{i}", "1", "Core" if i == 0 else "Common") for i in range(n_features)]
    return FeatureSchema(tuple(feats), target)


def make_dataset(X, y, ids=None, schema=None):
    X = np.asarray(X, dtype=float)
    schema = schema or make_schema(X.shape[1])
    ids = ids or tuple(f"c{i}" for i in range(X.shape[0]))
    return Dataset(schema, tuple(ids), X, np.asarray(y, dtype=float))


@pytest.fixture
def small_schema():
    return make_schema(3)


@pytest.fixture
def toy_data():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 100, (40, 3))
    y = 2 * X[:, 0] + X[:, 1] + rng.normal(0, 1, 40)
    return make_dataset(X, y)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
