import json
import os

import numpy as np
import pytest

from dataio import Dataset
from errors import DanglingReferenceError, SchemaError, UnserializableStateError
from pipeline import Pipeline, canonical_signature, fit
from storage import (
    RunManifest,
    decode_container,
    encode_container,
    export_pipeline,
    fitted_path,
    get_pipeline_store,
    import_pipeline,
    load_manifest,
    parse_document,
    write_manifest,
)


def scaled_projection():
    return Pipeline.chain(
        ["standard_scaling", "pca_topk", "ridge"],
        "regression",
        [{}, {"n_components": 3}, {"alpha": 0.5}],
    )


def test_fitted_export_layout(tmp_path, registry, regression_data):
    fitted = fit(scaled_projection(), regression_data, seed=0, registry=registry)
    out_dir = str(tmp_path / "model")
    document = export_pipeline(fitted.pipeline, out_dir, fitted=fitted, train=regression_data)

    assert document.depth == 3
    assert document.task == "regression"
    assert document.total_pipeline_operations == {"pca_topk": 1, "ridge": 1, "standard_scaling": 1}
    assert [node.fitted_operation_path for node in document.nodes] == [fitted_path(i) for i in range(3)]
    assert fitted_path(2) == "fitted_operations/operation_2.pfop"
    for node in document.nodes:
        assert os.path.isfile(os.path.join(out_dir, node.fitted_operation_path))
    assert os.path.isfile(os.path.join(out_dir, "data", "train.csv"))
    assert document.nodes[2].nodes_from == [1]


def test_custom_params_are_reflected_in_params(tmp_path, registry):
    document = export_pipeline(scaled_projection(), str(tmp_path), registry=registry)
    ridge = document.nodes[2]
    assert ridge.custom_params == {"alpha": 0.5}
    assert ridge.params["alpha"] == 0.5
    assert document.nodes[0].custom_params == {}

    stored = json.loads((tmp_path / "pipeline.json").read_text())
    assert stored["nodes"][1]["params"] == {"n_components": 3}
    assert "fitted_operation_path" not in stored["nodes"][0]


def test_unfitted_round_trip(tmp_path, registry):
    pipeline = scaled_projection()
    export_pipeline(pipeline, str(tmp_path), registry=registry)
    bundle = import_pipeline(str(tmp_path), registry)
    assert not bundle.is_fitted
    assert canonical_signature(bundle.pipeline, registry) == canonical_signature(pipeline, registry)


def test_fitted_round_trip_predicts_identically(tmp_path, registry, regression_data):
    fitted = fit(scaled_projection(), regression_data, seed=0, registry=registry)
    export_pipeline(fitted.pipeline, str(tmp_path), fitted=fitted)

    bundle = get_pipeline_store().import_pipeline(str(tmp_path / "pipeline.json"), registry)
    assert bundle.is_fitted
    assert canonical_signature(bundle.pipeline, registry) == canonical_signature(fitted.pipeline, registry)
    np.testing.assert_array_equal(bundle.fitted.predict(regression_data).values, fitted.predict(regression_data).values)


def test_classifier_round_trip_keeps_probabilities(tmp_path, registry, classification_data):
    fitted = fit(Pipeline.chain(["minmax_scaling", "knn"], "classification"), classification_data, seed=0, registry=registry)
    export_pipeline(fitted.pipeline, str(tmp_path), fitted=fitted)
    restored = import_pipeline(str(tmp_path), registry).fitted
    before, after = fitted.predict(classification_data), restored.predict(classification_data)
    np.testing.assert_array_equal(before.labels, after.labels)
    np.testing.assert_array_equal(before.probabilities, after.probabilities)


def test_dangling_parent_reference(tmp_path, registry):
    export_pipeline(scaled_projection(), str(tmp_path), registry=registry)
    stored = json.loads((tmp_path / "pipeline.json").read_text())
    stored["nodes"][2]["nodes_from"] = [99]
    with pytest.raises(DanglingReferenceError):
        parse_document(json.dumps(stored))


def test_missing_container_is_a_dangling_reference(tmp_path, registry, regression_data):
    fitted = fit(scaled_projection(), regression_data, seed=0, registry=registry)
    export_pipeline(fitted.pipeline, str(tmp_path), fitted=fitted)
    os.remove(tmp_path / fitted_path(1))
    with pytest.raises(DanglingReferenceError):
        import_pipeline(str(tmp_path), registry)


def test_schema_errors_name_the_field(tmp_path, registry):
    export_pipeline(scaled_projection(), str(tmp_path), registry=registry)
    stored = json.loads((tmp_path / "pipeline.json").read_text())

    wrong_depth = dict(stored, depth=7)
    (tmp_path / "pipeline.json").write_text(json.dumps(wrong_depth))
    with pytest.raises(SchemaError) as info:
        import_pipeline(str(tmp_path), registry)
    assert info.value.location.endswith(".depth")

    stored["nodes"][2]["params"] = {"alpha": 1.0}
    with pytest.raises(SchemaError):
        parse_document(json.dumps(stored))

    stored["nodes"][0]["surprise"] = True
    with pytest.raises(SchemaError):
        parse_document(json.dumps(stored))


def test_container_rejects_foreign_bytes_and_objects():
    with pytest.raises(SchemaError):
        decode_container(b"PK\x03\x04not a container")
    with pytest.raises(UnserializableStateError):
        encode_container({"operation_id": "ols", "state": {"model": object()}}, node_id=0)
    blob = bytearray(encode_container({"operation_id": "ols", "state": {}}))
    blob[7:10] = b"\xff\xfe\xfd"
    with pytest.raises(SchemaError):
        decode_container(bytes(blob))


def test_container_arrays_keep_dtype_and_shape():
    record = {"operation_id": "ols", "state": {"coef": np.arange(6, dtype=np.float32).reshape(3, 2)}}
    restored = decode_container(encode_container(record))
    assert restored["state"]["coef"].dtype == np.float32
    np.testing.assert_array_equal(restored["state"]["coef"], record["state"]["coef"])


def test_manifest_tracks_inputs(tmp_path):
    data_path = tmp_path / "train.csv"
    data_path.write_text("x,y\n1,2\n", encoding="utf-8")
    manifest = RunManifest(command="compose", argv=["compose", "--seed", "3"], seed=3, config={"pop_size": 6})
    manifest.add_input(str(data_path))
    manifest.add_output("pipeline.json")
    manifest.add_output("pipeline.json")

    path = str(tmp_path / "run" / "manifest.json")
    write_manifest(path, manifest)
    loaded = load_manifest(path)
    assert loaded.seed == 3
    assert loaded.outputs == ["pipeline.json"]
    assert loaded.finished_at
    assert loaded.changed_inputs() == []

    data_path.write_text("x,y\n1,3\n", encoding="utf-8")
    assert loaded.changed_inputs() == [os.path.abspath(str(data_path))]


def test_category_maps_survive_export(tmp_path, registry):
    data = Dataset(features=np.array([[0.0], [1.0], [0.0], [1.0]]), target=np.array([0, 1, 0, 1]),
                   task="classification", feature_names=["color"], target_name="label",
                   category_maps={"color": {"blue": 0, "red": 1}, "label": {"no": 0, "yes": 1}})
    fitted = fit(Pipeline.chain(["logistic_regression"], "classification"), data, registry=registry)
    export_pipeline(fitted.pipeline, str(tmp_path), fitted=fitted)

    restored = import_pipeline(str(tmp_path), registry).fitted
    assert restored.category_maps == data.category_maps
    assert restored.target_name == "label"
    assert restored.class_names == ["no", "yes"]
