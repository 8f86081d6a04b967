"""
Benchmark harness over the bundled fixtures.

For every dataset and repeat it scores, on a held-out part:
- the composed pipeline before and after tuning
- the best single-model pipeline (chosen on an inner split of the training part)
- for series, the naive last-value forecast

Cells that fail are recorded with their error and the suite moves on.
"""

import logging
import os
import time
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from composer import ComposerConfig, compose
from dataio import Dataset, TaskType, split
from errors import PipeForgeError
from fixtures import fixture_names, load_fixture
from metrics import Metric, evaluate_metric
from operations.base import OperationKind, Stage
from operations.registry import get_registry
from pipeline.executor import fit, forecast_windows, score_fitted
from pipeline.graph import Pipeline
from settings import FITNESS_SPLIT_RATIO
from tuner import TuningConfig, tune

logger = logging.getLogger(__name__)

SUITES = {
    "regression": [TaskType.REGRESSION],
    "classification": [TaskType.CLASSIFICATION],
    "timeseries": [TaskType.TS_FORECASTING],
    "all": [TaskType.REGRESSION, TaskType.CLASSIFICATION, TaskType.TS_FORECASTING],
}

TASK_METRICS = {
    TaskType.REGRESSION: [Metric.MAE, Metric.RMSE],
    TaskType.CLASSIFICATION: [Metric.ROC_AUC, Metric.F1],
    TaskType.TS_FORECASTING: [Metric.MAPE],
}

# forecast horizons reported separately for every series
TS_HORIZONS = (10, 50)

APPROACHES = ("composed", "composed_tuned", "single_model", "naive_last_value")

CELL_FAILURES = (PipeForgeError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def benchmark_datasets(suite: str) -> Dict[str, Dataset]:
    datasets = {}
    for task in SUITES[suite]:
        for name in fixture_names(task):
            if task == TaskType.TS_FORECASTING:
                for horizon in TS_HORIZONS:
                    datasets[f"{name}@h{horizon}"] = load_fixture(name, horizon=horizon)
            else:
                datasets[name] = load_fixture(name)
    return datasets


def single_model_pipelines(task: TaskType, registry) -> List[Pipeline]:
    pipelines = []
    for spec in registry.filter(task=task, kinds={OperationKind.MODEL}):
        if "atomized" in spec.tags:
            continue
        if task == TaskType.TS_FORECASTING:
            pipelines.append(Pipeline.chain(["lagged_transform", spec.operation_id], task))
        elif spec.accepts == Stage.TABLE:
            pipelines.append(Pipeline.chain([spec.operation_id], task))
    return pipelines


def best_single_model(train: Dataset, metric: Metric, seed: int, registry) -> Pipeline:
    """Single-model pipeline with the best score on an inner split of `train`"""
    fit_part, score_part = split(train, FITNESS_SPLIT_RATIO, seed)
    best, best_fitness = None, -np.inf
    for pipeline in single_model_pipelines(train.task, registry):
        try:
            fitness = score_fitted(fit(pipeline, fit_part, seed, registry), fit_part, score_part, metric).fitness
        except CELL_FAILURES as exc:
            logger.debug("baseline %s failed: %s", pipeline, exc)
            continue
        if fitness > best_fitness:
            best, best_fitness = pipeline, fitness
    if best is None:
        raise PipeForgeError(f"no single model fits {train.task.value}")
    return best


def naive_forecast(train: Dataset, test: Dataset, horizon: Optional[int] = None) -> np.ndarray:
    """Last observed value, walked forward in `horizon` windows like the pipeline forecasts"""
    if not horizon:
        return np.full(test.n_rows, train.target[-1])
    forecast = np.empty(test.n_rows)
    for history, start, stop in forecast_windows(train, test, horizon):
        forecast[start:stop] = history.target[-1]
    return forecast


def _cells(dataset: str, approach: str, repeat: int, metrics: Sequence[Metric], compute) -> List[Dict]:
    """One row per metric; a failure fills every metric of the cell with NaN plus the error"""
    try:
        values = compute()
        return [{"dataset": dataset, "approach": approach, "repeat": repeat, "metric": m.value,
                 "value": values[m], "error": ""} for m in metrics]
    except CELL_FAILURES as exc:
        logger.warning("%s / %s / repeat %d failed: %s", dataset, approach, repeat, exc)
        return [{"dataset": dataset, "approach": approach, "repeat": repeat, "metric": m.value,
                 "value": np.nan, "error": f"{type(exc).__name__}: {exc}"} for m in metrics]


def run_dataset(name: str, data: Dataset, repeats: int, config: ComposerConfig, tune_iterations: int,
                seed: int = 0, registry=None) -> List[Dict]:
    registry = registry or get_registry()
    metrics = TASK_METRICS[data.task]
    rows: List[Dict] = []
    for repeat in range(repeats):
        run_seed = seed + repeat
        train, test = split(data, 0.8, run_seed)

        def scores(pipeline: Pipeline) -> Dict[Metric, float]:
            fitted = fit(pipeline, train, run_seed, registry)
            return {m: score_fitted(fitted, train, test, m).value for m in metrics}

        composed: Dict[str, Optional[Pipeline]] = {"pipeline": None}

        def composed_scores():
            run_config = replace(config, seed=run_seed, telemetry_path=None)
            front = compose(run_config, train, registry)
            composed["pipeline"] = front.best.pipeline
            return scores(composed["pipeline"])

        def tuned_scores():
            if composed["pipeline"] is None:
                raise PipeForgeError("composition failed, nothing to tune")
            tuned, _ = tune(composed["pipeline"], train, TuningConfig(iterations=tune_iterations, seed=run_seed), registry)
            return scores(tuned)

        def single_scores():
            return scores(best_single_model(train, metrics[0], run_seed, registry))

        rows += _cells(name, "composed", repeat, metrics, composed_scores)
        rows += _cells(name, "composed_tuned", repeat, metrics, tuned_scores)
        rows += _cells(name, "single_model", repeat, metrics, single_scores)
        if data.task == TaskType.TS_FORECASTING:
            rows += _cells(name, "naive_last_value", repeat, metrics, lambda: {
                m: evaluate_metric(m, naive_forecast(train, test, data.forecast_horizon), test.target).value for m in metrics
            })
        logger.info("%s repeat %d done", name, repeat)
    return rows


def summarize(cells: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample standard deviation per dataset, approach and metric"""
    cells = cells.assign(failed=cells["error"] != "")
    summary = cells.groupby(["dataset", "approach", "metric"], sort=True).agg(
        mean=("value", "mean"),
        std=("value", "std"),
        runs=("value", "count"),
        failures=("failed", "sum"),
    ).reset_index()
    summary["std"] = summary["std"].fillna(0.0)
    summary["failures"] = summary["failures"].astype(int)
    return summary


def summary_table(summary: pd.DataFrame) -> str:
    """Plain-text table: one row per dataset and approach, one "mean ± std" column per metric"""
    text = summary.assign(cell=[
        "failed" if np.isnan(mean) else f"{mean:.4f} ± {std:.4f}" for mean, std in zip(summary["mean"], summary["std"])
    ])
    table = text.pivot_table(index=["dataset", "approach"], columns="metric", values="cell", aggfunc="first", fill_value="")
    return table.to_string()


def write_summary_plot(path: str, summary: pd.DataFrame, metric: str):
    rows = summary[summary["metric"] == metric]
    if rows.empty:
        return
    table = rows.pivot(index="dataset", columns="approach", values="mean")
    errors = rows.pivot(index="dataset", columns="approach", values="std")
    fig, ax = plt.subplots(figsize=(9, 4.5))
    table.plot.bar(ax=ax, yerr=errors, capsize=3)
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} by approach")
    fig.tight_layout()
    fig.savefig(path, dpi=180)
    plt.close(fig)


def run_suite(suite: str, repeats: int, out_dir: str, config: Optional[ComposerConfig] = None,
              tune_iterations: int = 20, seed: int = 0, registry=None) -> pd.DataFrame:
    """Run every dataset of `suite`, write cells.csv, summary.csv, summary.txt; return the summary"""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    config = config or ComposerConfig(pop_size=6, max_generations=3, time_limit_seconds=60.0)
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    start = time.perf_counter()
    for name, data in benchmark_datasets(suite).items():
        rows += run_dataset(name, data, repeats, config, tune_iterations, seed, registry)
    cells = pd.DataFrame(rows, columns=["dataset", "approach", "repeat", "metric", "value", "error"])
    cells.to_csv(os.path.join(out_dir, "cells.csv"), index=False)
    summary = summarize(cells)
    summary.to_csv(os.path.join(out_dir, "summary.csv"), index=False)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as handle:
        handle.write("series datasets are synthetic substitutes\n" if suite in ("timeseries", "all") else "")
        handle.write(summary_table(summary) + "\n")
    for metric in sorted(summary["metric"].unique()):
        write_summary_plot(os.path.join(out_dir, f"summary_{metric}.png"), summary, metric)
    logger.info("benchmark %s finished in %.1fs", suite, time.perf_counter() - start)
    return summary
