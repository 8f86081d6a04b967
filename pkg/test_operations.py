import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from dataio import Dataset, TaskType
from errors import InvalidHyperparamError, SingularFitError, UnknownOperationError
from operations import (
    OperationKind,
    get_registry,
    load_registry,
    op_fit,
    op_fit_transform,
    op_predict,
    registry_filter,
    restore_operation,
)
from operations.hyperparams import Categorical, FloatRange, IntRange, parse_domain
from pipeline import Node, Pipeline, fit, validate


def ids(specs):
    return {spec.operation_id for spec in specs}


def test_bundled_registry_has_every_required_operation(registry):
    assert set(registry.ids) == {
        "ols", "ridge", "logistic_regression", "decision_tree", "knn", "naive_bayes_gaussian",
        "standard_scaling", "minmax_scaling", "mean_imputation", "zscore_outlier_filter", "pca_topk",
        "lagged_transform", "moving_average_smoothing", "merge_concat",
    }
    kinds = {spec.kind for spec in registry}
    assert {OperationKind.MODEL, OperationKind.DATA_PROCESSING, OperationKind.DATA_FLOW} <= kinds


def test_filter_by_tag_and_task(registry):
    linear = ids(registry_filter(registry, {"linear"}, None, TaskType.REGRESSION))
    assert {"ridge", "ols"} <= linear
    assert "knn" not in linear and "decision_tree" not in linear


def test_filter_include_and_exclude(registry):
    selected = ids(registry.filter({"interpretable"}, {"non-linear"}))
    assert selected == {"ols", "ridge", "logistic_regression"}


def test_filter_excluding_every_tag_is_empty(registry):
    every_tag = set().union(*(spec.tags for spec in registry))
    assert registry.filter(tags_exclude=every_tag) == []


def test_ridge_without_penalty_solves_exact_line(registry):
    x = np.linspace(-5.0, 5.0, 20).reshape(-1, 1)
    fitted = op_fit(registry.get("ridge"), {"alpha": 0.0}, x, 3.0 * x[:, 0] + 1.0)
    assert fitted.state["coef"].ravel()[0] == pytest.approx(3.0, abs=1e-8)
    assert np.ravel(fitted.state["intercept"])[0] == pytest.approx(1.0, abs=1e-8)


def test_ridge_without_penalty_on_singular_system_raises(registry):
    column = np.arange(6.0)
    with pytest.raises(SingularFitError):
        op_fit(registry.get("ridge"), {"alpha": 0.0}, np.column_stack([column, column]), column)


def test_ols_rejects_rank_deficient_design(registry):
    column = np.arange(6.0)
    with pytest.raises(SingularFitError):
        op_fit(registry.get("ols"), {}, np.column_stack([column, 2.0 * column]), column)


def test_standard_scaling_stores_and_applies_statistics(registry):
    fitted = op_fit(registry.get("standard_scaling"), {}, [[8.0], [12.0]], None)
    assert fitted.state["mean"][0] == pytest.approx(10.0, abs=1e-12)
    assert fitted.state["std"][0] == pytest.approx(2.0, abs=1e-12)
    assert op_predict(fitted, [[14.0]])[0, 0] == pytest.approx(2.0)


def test_minmax_scaling_maps_to_unit_interval(registry):
    fitted = op_fit(registry.get("minmax_scaling"), {}, [[2.0], [4.0], [6.0]], None)
    np.testing.assert_allclose(op_predict(fitted, [[2.0], [5.0], [6.0]]).ravel(), [0.0, 0.75, 1.0])


@pytest.mark.parametrize("operation_id", ["standard_scaling", "minmax_scaling"])
def test_scaling_inverts_exactly(registry, operation_id):
    x = np.random.default_rng(4).normal(5.0, 3.0, (50, 3))
    fitted = op_fit(registry.get(operation_id), {}, x, None)
    restored = fitted.operation.inverse_transform(fitted.state, op_predict(fitted, x))
    np.testing.assert_allclose(restored, x, atol=1e-9)


def test_mean_imputation_fills_missing_cells(registry):
    fitted = op_fit(registry.get("mean_imputation"), {}, [[1.0], [np.nan], [3.0]], None)
    np.testing.assert_allclose(op_predict(fitted, [[np.nan], [5.0]]).ravel(), [2.0, 5.0])


def test_depth_one_tree_cannot_learn_xor(registry):
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    fitted = op_fit(registry.get("decision_tree"), {"max_depth": 1}, x, y, task=TaskType.CLASSIFICATION)
    labels = op_predict(fitted, x)[:, 0]
    assert np.mean(labels == y) <= 0.75


def test_deep_tree_separates_axis_aligned_classes(registry):
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    fitted = op_fit(registry.get("decision_tree"), {"max_depth": 2}, x, [0, 0, 1, 1], task="classification")
    np.testing.assert_array_equal(op_predict(fitted, x)[:, 0], [0, 0, 1, 1])


def test_lagged_transform_builds_sliding_windows(registry):
    series = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    _, output = op_fit_transform(
        registry.get("lagged_transform"), {"window_size": 3}, series, series, task=TaskType.TS_FORECASTING, horizon=1
    )
    np.testing.assert_array_equal(output.features, [[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]])
    np.testing.assert_array_equal(output.target.ravel(), [4.0, 5.0])


def test_moving_average_is_trailing(registry):
    fitted = op_fit(registry.get("moving_average_smoothing"), {"window_size": 2}, [1.0, 2.0, 3.0, 4.0], None,
                    task=TaskType.TS_FORECASTING)
    np.testing.assert_allclose(op_predict(fitted, [1.0, 2.0, 3.0, 4.0]).ravel(), [1.0, 1.5, 2.5, 3.5])


def test_zscore_filter_drops_single_far_outlier(registry):
    x = np.append(np.linspace(-1.0, 1.0, 100), 20.0).reshape(-1, 1)
    fitted, output = op_fit_transform(registry.get("zscore_outlier_filter"), {"threshold": 3.0}, x, np.zeros(101))
    assert output.n_rows == 100
    assert 100 not in output.idx
    # prediction rows are never dropped
    assert op_predict(fitted, x).shape == (101, 1)


def test_pca_projects_onto_dominant_direction(registry):
    rng = np.random.default_rng(0)
    t = rng.normal(size=200)
    x = np.column_stack([t, 2.0 * t + rng.normal(scale=0.01, size=200)])
    fitted = op_fit(registry.get("pca_topk"), {"n_components": 1}, x, None, seed=4)
    direction = fitted.state["components"][0]
    np.testing.assert_allclose(direction, np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-3)
    assert op_predict(fitted, x).shape == (200, 1)


def test_knn_probabilities_sum_to_one(registry, classification_data):
    fitted = op_fit(registry.get("knn"), {"n_neighbors": 4}, classification_data.features, classification_data.target,
                    task=TaskType.CLASSIFICATION)
    output = op_predict(fitted, classification_data.features[:10])
    np.testing.assert_allclose(output[:, 1:].sum(axis=1), 1.0)


def test_naive_bayes_separates_distant_clusters(registry):
    x = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]])
    y = np.array([0, 0, 0, 1, 1, 1])
    fitted = op_fit(registry.get("naive_bayes_gaussian"), {}, x, y, task=TaskType.CLASSIFICATION)
    np.testing.assert_array_equal(op_predict(fitted, [[0.05], [10.05]])[:, 0], [0, 1])


def test_logistic_regression_learns_threshold(registry):
    x = np.linspace(-3.0, 3.0, 60).reshape(-1, 1)
    y = (x[:, 0] > 0).astype(int)
    fitted = op_fit(registry.get("logistic_regression"), {}, x, y, task=TaskType.CLASSIFICATION)
    labels = op_predict(fitted, [[-2.0], [2.0]])[:, 0]
    np.testing.assert_array_equal(labels, [0, 1])


def test_out_of_space_hyperparameter_is_rejected(registry):
    with pytest.raises(InvalidHyperparamError):
        op_fit(registry.get("knn"), {"n_neighbors": 40}, [[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(InvalidHyperparamError):
        op_fit(registry.get("standard_scaling"), {"with_mean": True}, [[0.0]], None)


def test_unknown_operation_lookup(registry):
    with pytest.raises(UnknownOperationError):
        registry.get("gradient_magic")


def test_restored_operation_predicts_identically(registry, regression_data):
    fitted = op_fit(registry.get("ridge"), {"alpha": 0.5}, regression_data.features, regression_data.target)
    restored = restore_operation(registry, fitted.to_record())
    np.testing.assert_array_equal(op_predict(restored, regression_data.features), op_predict(fitted, regression_data.features))
    assert restored.params == {"alpha": 0.5}


def test_registry_env_selects_custom_file(tmp_path, monkeypatch):
    path = tmp_path / "registry.json"
    bundled = get_registry().to_dict()
    bundled["operations"] = [op for op in bundled["operations"] if op["operation_id"] in ("ols", "standard_scaling")]
    path.write_text(json.dumps(bundled))
    monkeypatch.setenv("PIPEFORGE_REGISTRY", str(path))
    assert get_registry().ids == ["ols", "standard_scaling"]


def test_concurrent_first_loads_share_one_registry(tmp_path, monkeypatch):
    path = tmp_path / "shared.json"
    path.write_text(json.dumps(get_registry().to_dict()))
    monkeypatch.setenv("PIPEFORGE_REGISTRY", str(path))
    with ThreadPoolExecutor(max_workers=8) as pool:
        loaded = list(pool.map(lambda _: get_registry(), range(32)))
    assert all(registry is loaded[0] for registry in loaded)


def test_registry_file_with_unimplemented_operation_fails(tmp_path):
    path = tmp_path / "registry.json"
    path.write_text(json.dumps({"version": 1, "operations": [
        {"operation_id": "gradient_magic", "kind": "model", "tasks": ["regression"]}
    ]}))
    with pytest.raises(UnknownOperationError):
        load_registry(str(path))


def test_domain_parsing_and_membership():
    assert parse_domain({"type": "int", "low": 1, "high": 3}) == IntRange(1, 3)
    assert IntRange(1, 3).contains(2.0) and not IntRange(1, 3).contains(True)
    log = parse_domain({"type": "float", "low": 1e-4, "high": 1e2, "scale": "log", "admissible_low": 0.0})
    assert log.contains(0.0) and not log.contains(-1.0) and not log.contains(float("nan"))
    assert Categorical(("a", "b")).contains("a")
    with pytest.raises(ValueError):
        FloatRange(0.0, 1.0, scale="log")


def smoke_pipeline(operation_id, task):
    final = "logistic_regression" if task == TaskType.CLASSIFICATION else "ridge"
    lags = ("lagged_transform", {"window_size": 4})
    series = task == TaskType.TS_FORECASTING
    if operation_id == "lagged_transform":
        return Pipeline.chain([operation_id, final], task, [lags[1], {}])
    if operation_id == "moving_average_smoothing":
        return Pipeline.chain([operation_id, "lagged_transform", final], task, [{}, lags[1], {}])
    head = [Node(0, lags[0], lags[1])] if series else []
    offset = len(head)
    parents = (0,) if series else ()
    if operation_id == "merge_concat":
        nodes = head + [
            Node(offset, "standard_scaling", parent_ids=parents),
            Node(offset + 1, "minmax_scaling", parent_ids=parents),
            Node(offset + 2, operation_id, parent_ids=(offset, offset + 1)),
            Node(offset + 3, final, parent_ids=(offset + 2,)),
        ]
        return Pipeline(nodes, task)
    nodes = head + [Node(offset, operation_id, parent_ids=parents)]
    if get_registry().get(operation_id).kind != OperationKind.MODEL:
        nodes.append(Node(offset + 1, final, parent_ids=(offset,)))
    return Pipeline(nodes, task)


def smoke_data(task):
    rng = np.random.default_rng(12)
    if task == TaskType.TS_FORECASTING:
        values = 20.0 + np.cumsum(rng.normal(0.0, 1.0, 20))
        return Dataset(features=values.reshape(-1, 1), target=values, task=task, forecast_horizon=1)
    x = rng.normal(0.0, 1.0, (20, 3))
    if task == TaskType.CLASSIFICATION:
        return Dataset(features=x, target=(np.arange(20) % 2).astype(np.int64), task=task)
    return Dataset(features=x, target=x @ np.array([1.0, -2.0, 0.5]), task=task)


@pytest.mark.parametrize(
    "operation_id,task",
    [(spec.operation_id, task) for spec in get_registry().specs() for task in sorted(spec.tasks, key=lambda t: t.value)],
)
def test_every_operation_fits_and_predicts_on_twenty_rows(registry, operation_id, task):
    pipeline = smoke_pipeline(operation_id, task)
    assert validate(pipeline, registry=registry, task=task).ok
    data = smoke_data(task)
    table = fit(pipeline, data, seed=0, registry=registry).predict(data)
    expected = data.forecast_horizon if task == TaskType.TS_FORECASTING else data.n_rows
    assert len(table) == expected
    assert np.all(np.isfinite(table.values))


@pytest.mark.parametrize("operation_id", ["standard_scaling", "minmax_scaling", "mean_imputation", "zscore_outlier_filter", "pca_topk"])
def test_data_operations_ignore_the_target_at_predict_time(registry, regression_data, operation_id):
    fitted = fit(Pipeline.chain([operation_id, "ridge"], TaskType.REGRESSION), regression_data, seed=0, registry=registry)
    corrupted = Dataset(features=regression_data.features, target=np.full(regression_data.n_rows, np.nan), task="regression")
    np.testing.assert_array_equal(fitted.predict(corrupted).values, fitted.predict(regression_data).values)
    filtered = fitted.run(corrupted, until=0)
    np.testing.assert_array_equal(filtered.features, fitted.run(regression_data, until=0).features)
