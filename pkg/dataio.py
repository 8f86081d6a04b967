"""
Dataset ingestion, task descriptors and train/test splitting.

Tabular datasets hold a float64 feature matrix plus a target vector. A time-series
dataset is a single ordered series: the series itself is both the target and the only
feature column, and lagging happens inside the pipeline.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from errors import DataShapeError, MissingTargetError, ParseError, TooFewRowsError, UnseenCategoryError

logger = logging.getLogger(__name__)


class TaskType(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    TS_FORECASTING = "ts_forecasting"

    @classmethod
    def parse(cls, value) -> "TaskType":
        if isinstance(value, TaskType):
            return value
        aliases = {"ts": cls.TS_FORECASTING, "timeseries": cls.TS_FORECASTING, "forecasting": cls.TS_FORECASTING}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass
class Dataset:
    features: np.ndarray
    target: np.ndarray
    task: TaskType
    feature_names: List[str] = field(default_factory=list)
    forecast_horizon: Optional[int] = None
    n_classes: int = 0
    category_maps: Dict[str, Dict[str, int]] = field(default_factory=dict)
    target_name: str = "target"

    def __post_init__(self):
        self.task = TaskType.parse(self.task)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        if self.features.ndim != 2:
            raise DataShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.task == TaskType.CLASSIFICATION:
            self.target = np.asarray(self.target, dtype=np.int64)
        else:
            self.target = np.asarray(self.target, dtype=np.float64)
        if self.target.ndim != 1:
            raise DataShapeError(f"target must be 1-D, got shape {self.target.shape}")
        if self.features.shape[0] != self.target.shape[0]:
            raise DataShapeError(
                f"features have {self.features.shape[0]} rows but target has {self.target.shape[0]}"
            )
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]
        if self.task == TaskType.CLASSIFICATION:
            if self.target.size and self.target.min() < 0:
                raise DataShapeError("class labels must be encoded as 0..K-1")
            if self.n_classes == 0 and self.target.size:
                self.n_classes = int(self.target.max()) + 1
        if self.task == TaskType.TS_FORECASTING and self.forecast_horizon is None:
            self.forecast_horizon = 1

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.features)

    @property
    def is_time_series(self) -> bool:
        return self.task == TaskType.TS_FORECASTING

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[indices], target=self.target[indices])

    def to_frame(self) -> pd.DataFrame:
        if self.is_time_series:
            return pd.DataFrame({self.target_name: self.target})
        frame = pd.DataFrame(self.features, columns=self.feature_names)
        frame[self.target_name] = self.target
        return frame

    def write_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _row_from_parser_message(message: str) -> Optional[int]:
    match = re.search(r"line (\d+)", message)
    if not match:
        return None
    # header is line 1, so data row numbering starts one below
    return int(match.group(1)) - 1


def _encode_with_map(name: str, values: pd.Series, mapping: Dict[str, int]) -> np.ndarray:
    missing = (values == "").to_numpy()
    unseen = np.flatnonzero(~missing & ~values.isin(list(mapping)).to_numpy())
    if unseen.size:
        first = int(unseen[0])
        raise UnseenCategoryError(name, values.iloc[first], row=first + 1, known=len(mapping))
    encoded = values.map(mapping).to_numpy(dtype=np.float64, na_value=np.nan)
    encoded[missing] = np.nan
    return encoded


def _parse_feature_column(
    name: str, values: pd.Series, fixed: Optional[Dict[str, Dict[str, int]]] = None
) -> Tuple[np.ndarray, Optional[Dict[str, int]]]:
    """
    With `fixed` (the maps of a fitted pipeline) categorical columns reuse the training
    codes and every other column must be numeric.
    """
    if fixed is not None and name in fixed:
        return _encode_with_map(name, values, fixed[name]), fixed[name]

    missing = values == ""
    numeric = pd.to_numeric(values.where(~missing), errors="coerce")
    non_numeric = numeric.isna() & ~missing
    if not non_numeric.any():
        return numeric.to_numpy(dtype=np.float64), None
    if fixed is not None:
        first = int(np.flatnonzero(non_numeric.to_numpy())[0])
        raise ParseError(f"non-numeric value {values.iloc[first]!r} in a numeric column", row=first + 1, column=name)

    codes, uniques = pd.factorize(values.where(~missing, None), sort=True)
    encoded = codes.astype(np.float64)
    encoded[codes < 0] = np.nan
    mapping = {str(label): int(code) for code, label in enumerate(uniques)}
    logger.debug("label-encoded column %s with %d categories", name, len(mapping))
    return encoded, mapping


def load_csv(
    path: str,
    task,
    target_column: str,
    horizon: Optional[int] = None,
    require_target: bool = True,
    category_maps: Optional[Dict[str, Dict[str, int]]] = None,
) -> Dataset:
    """
    Read an RFC-4180 CSV with a header row into a Dataset. With `require_target` off a
    missing target column is filled with zeros, for feature-only prediction input.
    `category_maps` are the encodings of a fitted pipeline: categorical columns reuse
    them and an unseen category raises UnseenCategoryError.
    """
    task = TaskType.parse(task)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise ParseError("file is empty or has no header row") from exc
    except pd.errors.ParserError as exc:
        raise ParseError(str(exc).strip(), row=_row_from_parser_message(str(exc))) from exc

    frame.columns = [str(column).strip() for column in frame.columns]
    target_present = target_column in frame.columns
    if not target_present:
        if require_target:
            raise MissingTargetError(f"target column {target_column!r} not found in {list(frame.columns)}")
        frame[target_column] = "0"

    raw_target = frame[target_column].str.strip()
    blank = np.flatnonzero((raw_target == "").to_numpy())
    if blank.size:
        raise ParseError("target value is missing", row=int(blank[0]) + 1, column=target_column)

    category_maps_out: Dict[str, Dict[str, int]] = {}
    if task == TaskType.CLASSIFICATION:
        known = (category_maps or {}).get(target_column)
        if known is not None:
            target = (_encode_with_map(target_column, raw_target, known) if target_present
                      else np.zeros(len(frame))).astype(np.int64)
            category_maps_out[target_column] = known
            n_classes = len(known)
        else:
            codes, uniques = pd.factorize(raw_target, sort=True)
            target = codes.astype(np.int64)
            category_maps_out[target_column] = {str(label): int(code) for code, label in enumerate(uniques)}
            n_classes = len(uniques)
    else:
        numeric = pd.to_numeric(raw_target, errors="coerce")
        bad = np.flatnonzero(numeric.isna().to_numpy())
        if bad.size:
            raise ParseError(
                f"non-numeric target {raw_target.iloc[bad[0]]!r}", row=int(bad[0]) + 1, column=target_column
            )
        target = numeric.to_numpy(dtype=np.float64)
        n_classes = 0

    if task == TaskType.TS_FORECASTING:
        ignored = [column for column in frame.columns if column != target_column]
        if ignored:
            logger.info("time-series load uses only %s; ignoring %s", target_column, ignored)
        return Dataset(
            features=target.reshape(-1, 1),
            target=target,
            task=task,
            feature_names=[target_column],
            forecast_horizon=horizon or 1,
            target_name=target_column,
        )

    fixed = None if category_maps is None else {k: v for k, v in category_maps.items() if k != target_column}
    columns = []
    names = []
    for name in frame.columns:
        if name == target_column:
            continue
        values, mapping = _parse_feature_column(name, frame[name].str.strip(), fixed)
        if mapping is not None:
            category_maps_out[name] = mapping
        columns.append(values)
        names.append(name)

    features = np.column_stack(columns) if columns else np.empty((len(frame), 0))
    return Dataset(
        features=features,
        target=target,
        task=task,
        feature_names=names,
        forecast_horizon=horizon,
        n_classes=n_classes,
        category_maps=category_maps_out,
        target_name=target_column,
    )


def split_indices(data: Dataset, ratio: float, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    n = data.n_rows
    if data.is_time_series:
        # at least one full horizon, otherwise the ratio-sized tail
        n_test = max(data.forecast_horizon or 1, n - int(round(ratio * n)))
        n_train = n - n_test
        if n_train < 1 or n_test < 1:
            raise TooFewRowsError(f"cannot hold out {n_test} of {n} series points")
        return np.arange(n_train), np.arange(n_train, n)

    n_train = int(round(ratio * n))
    if n_train < 1 or n_train >= n:
        raise TooFewRowsError(f"ratio {ratio} on {n} rows leaves an empty side")
    order = np.random.default_rng(seed).permutation(n)
    return order[:n_train], order[n_train:]


def split(data: Dataset, ratio: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Shuffled split for tabular tasks, chronological hold-out for series"""
    train_idx, test_idx = split_indices(data, ratio, seed)
    return data.subset(train_idx), data.subset(test_idx)
