import numpy as np
import pytest

from dataio import Dataset, TaskType
from errors import DataShapeError, SchemaMismatchError
from pipeline import (
    MergePolicy,
    Node,
    Pipeline,
    StructureClass,
    canonical_signature,
    compute_depth,
    fit,
    pipeline_to_dot,
    predict,
    topology_signature,
    validate,
)
from pipeline.executor import evaluate_pipeline, rolling_forecast
from storage.fitted_state import encode_container


def diamond(task=TaskType.REGRESSION):
    return Pipeline(
        [
            Node(0, "standard_scaling"),
            Node(1, "ridge", parent_ids=(0,)),
            Node(2, "knn", parent_ids=(0,)),
            Node(3, "ridge", parent_ids=(1, 2)),
        ],
        task,
    )


def test_single_primary_node_is_valid(registry):
    result = validate(Pipeline([Node(0, "ols")]), StructureClass.COMPOSITE, 5, registry, TaskType.REGRESSION)
    assert result.ok
    assert result.rule is None


def test_two_node_cycle_is_rejected():
    pipeline = Pipeline([Node(0, "ridge", parent_ids=(1,)), Node(1, "ridge", parent_ids=(0,))])
    result = validate(pipeline, StructureClass.COMPOSITE, 5)
    assert not result
    assert result.rule == "cycle_detected"


def test_linear_class_accepts_chain_and_rejects_second_root(registry):
    chain = Pipeline.chain(["standard_scaling", "ridge", "ridge"], TaskType.REGRESSION)
    assert validate(chain, StructureClass.LINEAR, 5, registry)

    second_root = Pipeline(chain.nodes[:2] + [Node(3, "standard_scaling"), Node(2, "ridge", parent_ids=(1, 3))], TaskType.REGRESSION)
    result = validate(second_root, StructureClass.LINEAR, 5, registry)
    assert result.rule == "not_path_graph"
    assert validate(second_root, StructureClass.COMPOSITE, 5, registry)


@pytest.mark.parametrize(
    "pipeline, rule",
    [
        (Pipeline([]), "empty_pipeline"),
        (Pipeline([Node(0, "ols"), Node(0, "ridge")]), "duplicate_node_id"),
        (Pipeline([Node(0, "ols", parent_ids=(7,))]), "dangling_parent"),
        (Pipeline([Node(0, "ols"), Node(1, "ridge", parent_ids=(0, 0))]), "duplicate_parent"),
        (Pipeline([Node(0, "ols"), Node(1, "ridge")]), "isolated_node"),
        (Pipeline([Node(0, "ols"), Node(1, "ridge", parent_ids=(0,)), Node(2, "ridge", parent_ids=(0,))]), "multiple_sinks"),
    ],
)
def test_structural_rules(pipeline, rule):
    assert validate(pipeline, StructureClass.COMPOSITE, 5).rule == rule


def test_registry_rules(registry):
    assert validate(Pipeline([Node(0, "gradient_magic")]), "composite", 5, registry).rule == "unknown_operation"
    assert validate(Pipeline([Node(0, "logistic_regression")]), "composite", 5, registry, TaskType.REGRESSION).rule == "task_incompatible"
    assert validate(Pipeline([Node(0, "knn", {"n_neighbors": 99})]), "composite", 5, registry).rule == "invalid_hyperparams"
    assert validate(Pipeline.chain(["ridge", "standard_scaling"]), "composite", 5, registry).rule == "sink_not_model"
    assert validate(Pipeline([Node(0, "ridge")]), "composite", 5, registry, TaskType.TS_FORECASTING).rule == "stage_mismatch"


def test_depth_and_node_limits(registry):
    assert validate(diamond(), "composite", 2, registry).rule == "max_depth_exceeded"
    assert validate(diamond(), "composite", 5, registry, max_nodes=3).rule == "too_many_nodes"
    assert validate(diamond(), "composite", 5, registry, max_arity=1).rule == "max_arity_exceeded"
    assert validate(diamond(), "ensemble", 5, registry)


def test_compute_depth():
    assert compute_depth(Pipeline([Node(0, "ols")])) == 1
    assert compute_depth(Pipeline.chain(["standard_scaling", "pca_topk", "ridge"])) == 3
    assert compute_depth(diamond()) == 3


def test_ols_recovers_exact_slope(line_data, registry):
    fitted = fit(Pipeline([Node(0, "ols")]), line_data, seed=0, registry=registry)
    state = fitted.fitted_operation(0).state
    assert state["coef"].ravel()[0] == pytest.approx(2.0, abs=1e-9)
    table = predict(fitted, Dataset(features=[[5.0]], target=[0.0], task=TaskType.REGRESSION))
    assert table.values[0] == pytest.approx(10.0, abs=1e-9)


def test_scaler_then_ols_predicts_line(line_data, registry):
    fitted = fit(Pipeline.chain(["standard_scaling", "ols"]), line_data, seed=0, registry=registry)
    table = fitted.predict(line_data)
    np.testing.assert_allclose(table.values, line_data.target, atol=1e-9)


def test_fit_is_deterministic(regression_data, registry):
    pipeline = diamond()
    first = fit(pipeline, regression_data, seed=7, registry=registry)
    second = fit(pipeline, regression_data, seed=7, registry=registry)
    for node_id in pipeline.node_ids:
        assert encode_container(first.fitted_operation(node_id).to_record()) == encode_container(second.fitted_operation(node_id).to_record())


def test_one_nearest_neighbour_memorizes(regression_data, registry):
    fitted = fit(Pipeline([Node(0, "knn", {"n_neighbors": 1})]), regression_data, registry=registry)
    np.testing.assert_allclose(fitted.predict(regression_data).values, regression_data.target)


def test_direct_policy_concatenates_raw_features(regression_data, registry):
    pipeline = Pipeline(
        [
            Node(0, "ridge"),
            Node(1, "ols"),
            Node(2, "ridge", parent_ids=(0, 1), merge_policy=MergePolicy.DIRECT),
        ],
        TaskType.REGRESSION,
    )
    fitted = fit(pipeline, regression_data, registry=registry)
    assert fitted.fitted_operation(2).input_width == 2 + regression_data.n_features


def test_adaptive_without_enrichment_matches_sequential(regression_data, registry):
    def build(policy):
        return Pipeline(
            [Node(0, "standard_scaling"), Node(1, "knn", parent_ids=(0,)), Node(2, "ridge", parent_ids=(1,), merge_policy=policy)],
            TaskType.REGRESSION,
        )

    adaptive = fit(build(MergePolicy.ADAPTIVE), regression_data, seed=1, registry=registry).predict(regression_data)
    sequential = fit(build(MergePolicy.SEQUENTIAL), regression_data, seed=1, registry=registry).predict(regression_data)
    np.testing.assert_array_equal(adaptive.values, sequential.values)


def test_enrichment_widens_input(regression_data, registry):
    pipeline = Pipeline(
        [Node(0, "knn"), Node(1, "ridge", parent_ids=(0,), enrich=True)],
        TaskType.REGRESSION,
    )
    fitted = fit(pipeline, regression_data, registry=registry)
    assert fitted.fitted_operation(1).input_width == 1 + regression_data.n_features


def test_predict_rejects_wrong_width(regression_data, registry):
    fitted = fit(Pipeline([Node(0, "ridge")]), regression_data, registry=registry)
    narrow = Dataset(features=regression_data.features[:, :2], target=regression_data.target, task=TaskType.REGRESSION)
    with pytest.raises(SchemaMismatchError):
        fitted.predict(narrow)


def test_fit_rejects_task_mismatch(regression_data, registry):
    with pytest.raises(DataShapeError):
        fit(Pipeline([Node(0, "logistic_regression")], TaskType.CLASSIFICATION), regression_data, registry=registry)


def test_classification_prediction_table(classification_data, registry):
    fitted = fit(Pipeline.chain(["standard_scaling", "logistic_regression"]), classification_data, registry=registry)
    table = fitted.predict(classification_data)
    assert table.probabilities.shape == (classification_data.n_rows, 2)
    assert set(np.unique(table.labels)) <= {0, 1}
    assert list(table.to_frame().columns) == ["label", "proba_0", "proba_1"]


def test_forecast_returns_horizon_values(series_data, registry):
    fitted = fit(Pipeline.chain(["lagged_transform", "ridge"], TaskType.TS_FORECASTING), series_data, registry=registry)
    table = fitted.predict(series_data)
    assert len(table) == series_data.forecast_horizon


def test_evaluate_pipeline_scores_holdout(regression_data, registry):
    train, test = regression_data.subset(np.arange(90)), regression_data.subset(np.arange(90, 120))
    value = evaluate_pipeline(Pipeline([Node(0, "ridge")]), train, test, "MAE", registry=registry)
    assert 0.0 < value.value < 1.0


def test_predictions_do_not_depend_on_topological_order(regression_data, registry):
    nodes = [
        Node(0, "standard_scaling"),
        Node(1, "pca_topk", {"n_components": 2}, parent_ids=(0,)),
        Node(2, "knn", parent_ids=(0,)),
        Node(3, "ridge", parent_ids=(1, 2)),
    ]
    first = Pipeline(nodes, TaskType.REGRESSION)
    second = Pipeline([nodes[0], nodes[2], nodes[1], nodes[3]], TaskType.REGRESSION)
    assert first.topological_order() != second.topological_order()
    np.testing.assert_array_equal(
        fit(first, regression_data, seed=4, registry=registry).predict(regression_data).values,
        fit(second, regression_data, seed=4, registry=registry).predict(regression_data).values,
    )


def test_forecast_scoring_walks_across_the_whole_tail(registry):
    values = 10.0 + np.sin(np.arange(60.0) / 3.0)
    series = Dataset(features=values.reshape(-1, 1), target=values, task="ts", forecast_horizon=3)
    train, test = series.subset(np.arange(40)), series.subset(np.arange(40, 60))
    fitted = fit(Pipeline.chain(["lagged_transform", "ridge"], TaskType.TS_FORECASTING), train, registry=registry)
    forecast = rolling_forecast(fitted, train, test)
    assert forecast.shape == (20,)
    np.testing.assert_array_equal(forecast[:3], fitted.predict(train).values)
    np.testing.assert_array_equal(forecast[3:6], fitted.predict(series.subset(np.arange(43))).values)
    np.testing.assert_array_equal(forecast[18:], fitted.predict(series.subset(np.arange(58))).values[:2])


def test_without_node_rewires_parents():
    pruned = diamond().without_node(1)
    assert pruned.node(3).parent_ids == (0, 2)
    assert 1 not in pruned


def test_subgraph_keeps_ancestors():
    sub = diamond().subgraph(1)
    assert sorted(sub.node_ids) == [0, 1]
    assert sub.final_node_id == 1


def test_relabeling_is_canonical(registry):
    shuffled = Pipeline(
        [
            Node(10, "ridge", parent_ids=(4, 7)),
            Node(7, "knn", parent_ids=(5,)),
            Node(4, "ridge", parent_ids=(5,)),
            Node(5, "standard_scaling"),
        ],
        TaskType.REGRESSION,
    )
    assert canonical_signature(shuffled, registry) == canonical_signature(diamond(), registry)
    assert shuffled.relabeled() == diamond().relabeled()
    assert sorted(shuffled.relabeled().node_ids) == [0, 1, 2, 3]


def test_signature_merges_defaults(registry):
    explicit = Pipeline([Node(0, "ridge", {"alpha": 1.0})])
    implicit = Pipeline([Node(0, "ridge")])
    assert canonical_signature(explicit, registry) == canonical_signature(implicit, registry)
    tuned = Pipeline([Node(0, "ridge", {"alpha": 2.0})])
    assert canonical_signature(tuned, registry) != canonical_signature(implicit, registry)
    assert topology_signature(tuned) == topology_signature(implicit)


def test_edge_order_is_part_of_signature(registry):
    forward = diamond()
    swapped = forward.with_node(forward.node(3).evolve(parent_ids=(2, 1)))
    assert canonical_signature(forward, registry) != canonical_signature(swapped, registry)


def test_dot_rendering_colors_importance():
    dot = pipeline_to_dot(diamond(), {0: 0.4, 1: -0.2, 2: 0.0})
    assert dot.startswith("digraph pipeline {")
    assert 'class="important"' in dot and 'class="harmful"' in dot and 'class="neutral"' in dot
    assert "n1 -> n3;" in dot
