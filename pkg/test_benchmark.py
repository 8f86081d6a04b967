import numpy as np
import pandas as pd
import pytest

import benchmark
from composer import ComposerConfig
from dataio import Dataset, TaskType


def test_series_datasets_are_listed_per_horizon():
    names = list(benchmark.benchmark_datasets("timeseries"))
    assert "series_short@h10" in names
    assert "series_long@h50" in names
    assert len(names) == 2 * len(benchmark.TS_HORIZONS)


def test_single_model_baselines(registry):
    tabular = benchmark.single_model_pipelines(TaskType.REGRESSION, registry)
    assert all(len(pipeline) == 1 for pipeline in tabular)
    assert "ols" in {pipeline.nodes[0].operation_id for pipeline in tabular}
    forecasting = benchmark.single_model_pipelines(TaskType.TS_FORECASTING, registry)
    assert all(pipeline.nodes[0].operation_id == "lagged_transform" for pipeline in forecasting)


def test_best_single_model_prefers_the_linear_fit(registry):
    data = Dataset(features=np.arange(40.0).reshape(-1, 1), target=3.0 * np.arange(40.0) + 1.0, task="regression")
    best = benchmark.best_single_model(data, benchmark.Metric.MAE, 0, registry)
    assert best.nodes[0].operation_id in ("ols", "ridge")


def test_naive_forecast_repeats_last_value(series_data):
    train, test = series_data.subset(np.arange(200)), series_data.subset(np.arange(200, 205))
    np.testing.assert_array_equal(benchmark.naive_forecast(train, test), np.full(5, series_data.target[199]))


def test_naive_forecast_walks_forward_by_horizon(series_data):
    train, test = series_data.subset(np.arange(200)), series_data.subset(np.arange(200, 212))
    forecast = benchmark.naive_forecast(train, test, horizon=5)
    expected = np.repeat(series_data.target[[199, 204, 209]], [5, 5, 2])
    np.testing.assert_array_equal(forecast, expected)


def test_run_dataset_fills_every_cell(registry, regression_data):
    config = ComposerConfig(pop_size=4, max_generations=0, max_nodes=3, max_depth=3, time_limit_seconds=60.0)
    rows = benchmark.run_dataset("toy", regression_data, 1, config, tune_iterations=2, seed=0, registry=registry)
    assert len(rows) == 3 * 2
    assert {row["approach"] for row in rows} == {"composed", "composed_tuned", "single_model"}
    assert all(row["error"] == "" and np.isfinite(row["value"]) for row in rows)


def test_summary_statistics_and_failures():
    cells = pd.DataFrame([
        {"dataset": "d", "approach": "a", "repeat": 0, "metric": "MAE", "value": 1.0, "error": ""},
        {"dataset": "d", "approach": "a", "repeat": 1, "metric": "MAE", "value": 3.0, "error": ""},
        {"dataset": "d", "approach": "b", "repeat": 0, "metric": "MAE", "value": 2.0, "error": ""},
        {"dataset": "d", "approach": "c", "repeat": 0, "metric": "MAE", "value": np.nan, "error": "SingularFitError: x"},
    ])
    summary = benchmark.summarize(cells).set_index("approach")
    assert summary.loc["a", "mean"] == 2.0
    assert summary.loc["a", "std"] == pytest.approx(np.sqrt(2.0))
    assert summary.loc["b", "std"] == 0.0
    assert summary.loc["c", "failures"] == 1
    assert summary.loc["c", "runs"] == 0
    assert "failed" in benchmark.summary_table(summary.reset_index())


def test_run_suite_rejects_zero_repeats(tmp_path):
    with pytest.raises(ValueError):
        benchmark.run_suite("regression", 0, str(tmp_path))
