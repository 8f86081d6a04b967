import numpy as np
import pytest

from dataio import Dataset, TaskType
from fixtures import load_fixture
from operations.registry import get_registry


@pytest.fixture(autouse=True)
def _bundled_registry(monkeypatch):
    monkeypatch.delenv("PIPEFORGE_REGISTRY", raising=False)


@pytest.fixture
def registry():
    return get_registry()


@pytest.fixture
def line_data():
    """y = 2x on ten points, no noise"""
    x = np.arange(1.0, 11.0)
    return Dataset(features=x.reshape(-1, 1), target=2.0 * x, task=TaskType.REGRESSION)


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(3)
    x = rng.normal(0.0, 1.0, (120, 4))
    y = 1.5 * x[:, 0] - 2.0 * x[:, 1] + 0.5 * x[:, 2] + rng.normal(0.0, 0.3, 120)
    return Dataset(features=x, target=y, task=TaskType.REGRESSION)


@pytest.fixture
def classification_data():
    rng = np.random.default_rng(5)
    x = rng.normal(0.0, 1.0, (160, 4))
    y = (x[:, 0] + 0.8 * x[:, 1] - 0.5 * x[:, 2] + rng.normal(0.0, 0.4, 160) > 0.0).astype(np.int64)
    return Dataset(features=x, target=y, task=TaskType.CLASSIFICATION)


@pytest.fixture
def series_data():
    t = np.arange(240, dtype=np.float64)
    values = 50.0 + 0.05 * t + 8.0 * np.sin(2.0 * np.pi * t / 24.0)
    return Dataset(features=values.reshape(-1, 1), target=values, task=TaskType.TS_FORECASTING, forecast_horizon=5)


@pytest.fixture
def elusage():
    return load_fixture("elusage_like")
