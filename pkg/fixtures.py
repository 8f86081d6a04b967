"""
Bundled synthetic datasets. Shapes follow small public benchmarks (scaled down where
needed); the values are generated, so the series are labeled as substitutes.
"""

import os
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from dataio import Dataset, TaskType


def _elusage_like(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    temperature = rng.uniform(20.0, 80.0, 55)
    month = rng.integers(1, 13, 55).astype(np.float64)
    usage = 100.0 + 0.08 * (temperature - 50.0) ** 2 + 5.0 * np.sin(month) + rng.normal(0.0, 3.0, 55)
    return np.column_stack([temperature, month]), usage, ["temperature", "month"]


def _friedman_like(rng: np.random.Generator):
    x = rng.uniform(0.0, 1.0, (200, 5))
    y = (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
        + rng.normal(0.0, 1.0, 200)
    )
    return x, y, [f"x{i}" for i in range(5)]


def _housing_like(rng: np.random.Generator):
    x = rng.normal(0.0, 1.0, (150, 6))
    y = 3.0 * x[:, 0] - 2.0 * x[:, 1] + 1.5 * x[:, 2] * x[:, 3] + 0.5 * x[:, 4] + rng.normal(0.0, 0.5, 150)
    return x, y, [f"f{i}" for i in range(6)]


def _ionosphere_like(rng: np.random.Generator):
    x = rng.normal(0.0, 1.0, (200, 12))
    score = x[:, 0] * x[:, 1] + np.sin(2.0 * x[:, 2]) + 0.8 * x[:, 3] - 0.5 * x[:, 4] + rng.normal(0.0, 0.3, 200)
    return x, (score > 0.0).astype(np.int64), [f"pulse{i}" for i in range(12)]


def _spectf_like(rng: np.random.Generator):
    x = rng.normal(0.0, 1.0, (150, 10))
    logit = 1.5 * x[:, 0] - 1.0 * x[:, 1] + 0.8 * x[:, 2] ** 2 - 0.8
    proba = 1.0 / (1.0 + np.exp(-logit))
    return x, (rng.uniform(0.0, 1.0, 150) < proba).astype(np.int64), [f"roi{i}" for i in range(10)]


def _series(n: int, level: float, trend: float, seasons, noise: float, rng: np.random.Generator):
    t = np.arange(n, dtype=np.float64)
    values = level + trend * t + rng.normal(0.0, noise, n)
    for period, amplitude in seasons:
        values += amplitude * np.sin(2.0 * np.pi * t / period)
    return values


def _series_short(rng):
    return _series(500, 50.0, 0.05, [(50, 10.0)], 1.0, rng)


def _series_long(rng):
    return _series(2000, 100.0, 0.02, [(100, 15.0), (25, 5.0)], 1.5, rng)


# name -> (builder, task, target column)
FIXTURES: Dict[str, Tuple[Callable, TaskType, str]] = {
    "elusage_like": (_elusage_like, TaskType.REGRESSION, "usage"),
    "friedman_like": (_friedman_like, TaskType.REGRESSION, "y"),
    "housing_like": (_housing_like, TaskType.REGRESSION, "price"),
    "ionosphere_like": (_ionosphere_like, TaskType.CLASSIFICATION, "label"),
    "spectf_like": (_spectf_like, TaskType.CLASSIFICATION, "label"),
    "series_short": (_series_short, TaskType.TS_FORECASTING, "value"),
    "series_long": (_series_long, TaskType.TS_FORECASTING, "value"),
}

FIXTURE_SEED = 20210


def fixture_names(task=None) -> List[str]:
    if task is None:
        return sorted(FIXTURES)
    task = TaskType.parse(task)
    return sorted(name for name, (_, fixture_task, _) in FIXTURES.items() if fixture_task == task)


def load_fixture(name: str, horizon: Optional[int] = None) -> Dataset:
    builder, task, target_name = FIXTURES[name]
    rng = np.random.default_rng([FIXTURE_SEED, sorted(FIXTURES).index(name)])
    if task == TaskType.TS_FORECASTING:
        values = builder(rng)
        return Dataset(
            features=values.reshape(-1, 1),
            target=values,
            task=task,
            feature_names=[target_name],
            forecast_horizon=horizon or 10,
            target_name=target_name,
        )
    features, target, names = builder(rng)
    return Dataset(features=features, target=target, task=task, feature_names=names, target_name=target_name)


def write_fixtures(out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for name in fixture_names():
        path = os.path.join(out_dir, f"{name}.csv")
        load_fixture(name).write_csv(path)
        written[name] = path
    return written
