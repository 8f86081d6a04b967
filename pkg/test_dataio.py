import numpy as np
import pytest

from dataio import Dataset, TaskType, load_csv, split, split_indices
from errors import DataShapeError, MissingTargetError, ParseError, SchemaMismatchError, TooFewRowsError, UnseenCategoryError
from fixtures import fixture_names, load_fixture, write_fixtures


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_small_regression_csv(tmp_path):
    data = load_csv(write(tmp_path, "x,y\n1,2\n2,4\n3,6\n"), "regression", "y")
    assert data.features.shape == (3, 1)
    np.testing.assert_array_equal(data.target, [2.0, 4.0, 6.0])
    assert data.feature_names == ["x"]
    assert data.target_name == "y"


def test_blank_cell_is_missing_not_zero(tmp_path):
    data = load_csv(write(tmp_path, "a,b,y\n1,,0\n2,5,1\n"), "regression", "y")
    assert np.isnan(data.features[0, 1])
    assert data.missing_mask.sum() == 1


def test_categorical_column_is_label_encoded(tmp_path):
    data = load_csv(write(tmp_path, "color,y\na,1\nb,2\na,3\n"), "regression", "y")
    np.testing.assert_array_equal(data.features[:, 0], [0.0, 1.0, 0.0])
    assert data.category_maps["color"] == {"a": 0, "b": 1}


def test_classification_target_is_encoded_sorted(tmp_path):
    data = load_csv(write(tmp_path, "x,label\n1,yes\n2,no\n3,yes\n"), "classification", "label")
    np.testing.assert_array_equal(data.target, [1, 0, 1])
    assert data.n_classes == 2
    assert data.category_maps["label"] == {"no": 0, "yes": 1}


def test_series_csv_uses_only_target_column(tmp_path):
    data = load_csv(write(tmp_path, "t,value\n0,1.5\n1,2.5\n2,3.5\n"), "ts", "value", horizon=1)
    assert data.task == TaskType.TS_FORECASTING
    np.testing.assert_array_equal(data.features[:, 0], data.target)
    assert data.forecast_horizon == 1


def test_category_codes_do_not_depend_on_row_order(tmp_path):
    train = load_csv(write(tmp_path, "color,y\nred,1\nblue,5\nred,1\n"), "regression", "y")
    later = load_csv(write(tmp_path, "color\nblue\nred\n", name="later.csv"), "regression", "y",
                     require_target=False, category_maps=train.category_maps)
    assert later.category_maps["color"] == train.category_maps["color"]
    np.testing.assert_array_equal(later.features[:, 0], [train.category_maps["color"]["blue"],
                                                          train.category_maps["color"]["red"]])


def test_fixed_maps_reject_unseen_categories(tmp_path):
    maps = {"color": {"blue": 0, "red": 1}}
    with pytest.raises(UnseenCategoryError) as info:
        load_csv(write(tmp_path, "color,y\nred,1\ngreen,2\n"), "regression", "y", category_maps=maps)
    assert isinstance(info.value, SchemaMismatchError)
    assert info.value.column == "color"
    assert info.value.value == "green"
    assert info.value.row == 2

    with pytest.raises(ParseError) as text_in_numeric:
        load_csv(write(tmp_path, "color,size,y\nred,big,1\n", name="size.csv"), "regression", "y", category_maps=maps)
    assert text_in_numeric.value.column == "size"


def test_fixed_maps_keep_class_codes_and_blanks(tmp_path):
    maps = {"label": {"no": 0, "yes": 1}, "color": {"blue": 0, "red": 1}}
    data = load_csv(write(tmp_path, "color,label\n,yes\nred,yes\nblue,no\n"), "classification", "label",
                    category_maps=maps)
    np.testing.assert_array_equal(data.target, [1, 1, 0])
    assert data.n_classes == 2
    assert np.isnan(data.features[0, 0])
    np.testing.assert_array_equal(data.features[1:, 0], [1.0, 0.0])


def test_missing_target_column(tmp_path):
    path = write(tmp_path, "x,y\n1,2\n")
    with pytest.raises(MissingTargetError):
        load_csv(path, "regression", "price")
    relaxed = load_csv(path, "regression", "price", require_target=False)
    assert relaxed.features.shape == (1, 2)


def test_parse_errors_report_location(tmp_path):
    with pytest.raises(ParseError) as blank_target:
        load_csv(write(tmp_path, "x,y\n1,2\n2,\n"), "regression", "y")
    assert blank_target.value.row == 2
    assert blank_target.value.column == "y"

    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "x,y\n1,abc\n", name="text.csv"), "regression", "y")
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "", name="empty.csv"), "regression", "y")


def test_dataset_rejects_length_mismatch():
    with pytest.raises(DataShapeError):
        Dataset(features=np.zeros((3, 2)), target=np.zeros(2), task="regression")
    with pytest.raises(DataShapeError):
        Dataset(features=np.zeros((2, 1)), target=[-1, 0], task="classification")


def test_tabular_split_sizes_and_determinism(regression_data):
    data = regression_data.subset(np.arange(100))
    train, test = split(data, 0.8, seed=11)
    assert (train.n_rows, test.n_rows) == (80, 20)
    first = split_indices(data, 0.8, seed=11)
    second = split_indices(data, 0.8, seed=11)
    np.testing.assert_array_equal(first[0], second[0])
    assert set(first[0]).isdisjoint(first[1])


def test_series_split_is_chronological():
    values = np.arange(50.0)
    data = Dataset(features=values.reshape(-1, 1), target=values, task="ts", forecast_horizon=10)
    train, test = split(data, 0.8, seed=3)
    assert train.n_rows == 40
    np.testing.assert_array_equal(test.target, np.arange(40.0, 50.0))


def test_series_hold_out_uses_the_ratio_tail_beyond_one_horizon():
    values = np.arange(100.0)
    data = Dataset(features=values.reshape(-1, 1), target=values, task="ts", forecast_horizon=1)
    train, test = split(data, 0.8)
    assert (train.n_rows, test.n_rows) == (80, 20)
    long_horizon = Dataset(features=values.reshape(-1, 1), target=values, task="ts", forecast_horizon=30)
    train, test = split(long_horizon, 0.8)
    assert (train.n_rows, test.n_rows) == (70, 30)
    np.testing.assert_array_equal(test.target, np.arange(70.0, 100.0))


def test_split_rejects_degenerate_ratios(line_data):
    with pytest.raises(ValueError):
        split(line_data, 1.0)
    with pytest.raises(TooFewRowsError):
        split(line_data.subset([0]), 0.5)


def test_csv_round_trip_preserves_values(tmp_path, regression_data):
    path = str(tmp_path / "out.csv")
    regression_data.write_csv(path)
    loaded = load_csv(path, "regression", "target")
    np.testing.assert_array_equal(loaded.features, regression_data.features)
    np.testing.assert_array_equal(loaded.target, regression_data.target)


def test_fixtures_are_deterministic_and_cover_tasks(tmp_path):
    assert fixture_names(TaskType.REGRESSION) == ["elusage_like", "friedman_like", "housing_like"]
    assert fixture_names("classification") == ["ionosphere_like", "spectf_like"]
    assert fixture_names("ts") == ["series_long", "series_short"]
    np.testing.assert_array_equal(load_fixture("friedman_like").features, load_fixture("friedman_like").features)
    assert load_fixture("elusage_like").n_rows == 55
    assert load_fixture("series_short", horizon=50).forecast_horizon == 50

    written = write_fixtures(str(tmp_path))
    assert sorted(written) == fixture_names()
