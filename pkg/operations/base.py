"""
Building blocks shared by every operation: the data packet flowing along pipeline
edges, the Operation interface and the fitted-operation record.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from dataio import Dataset, TaskType
from errors import DataShapeError, SchemaMismatchError
from settings import PROBABILITY_CLIP


class Stage(str, Enum):
    TABLE = "table"
    SERIES = "series"


class OperationKind(str, Enum):
    MODEL = "model"
    DATA_PROCESSING = "data_processing"
    TASK_SPECIFIC_MODEL = "task_specific_model"
    DATA_FLOW = "data_flow"


@dataclass
class NodeData:
    """
    Rows travelling between nodes. `idx` keeps the original row position of every row so
    that parents which dropped different rows can still be aligned when merged.
    """
    features: np.ndarray
    target: Optional[np.ndarray]
    idx: np.ndarray
    task: TaskType
    n_classes: int = 0
    horizon: int = 1
    stage: Stage = Stage.TABLE
    labels: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None

    @classmethod
    def from_dataset(cls, data: Dataset, with_target: bool = True) -> "NodeData":
        return cls(
            features=data.features,
            target=data.target if with_target else None,
            idx=np.arange(data.n_rows),
            task=data.task,
            n_classes=data.n_classes,
            horizon=data.forecast_horizon or 1,
            stage=Stage.SERIES if data.is_time_series else Stage.TABLE,
        )

    @property
    def width(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    def evolve(self, **changes) -> "NodeData":
        return replace(self, **changes)

    def take(self, rows: np.ndarray) -> "NodeData":
        return replace(
            self,
            features=self.features[rows],
            target=None if self.target is None else self.target[rows],
            idx=self.idx[rows],
            labels=None if self.labels is None else self.labels[rows],
            probabilities=None if self.probabilities is None else self.probabilities[rows],
        )


def target_matrix(target: np.ndarray) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    return target.reshape(-1, 1) if target.ndim == 1 else target


def require_finite(features: np.ndarray, operation_id: str):
    if not np.all(np.isfinite(features)):
        raise ValueError(f"{operation_id} received missing or non-finite values; add mean_imputation upstream")


class Operation(ABC):
    """
    An operation is configured by its full hyperparameters and keeps no learned values
    on itself: `fit` returns a state dict and `transform` reads it back, so fitted states
    can be archived and shared across threads.
    """

    operation_id = ""
    kind = OperationKind.DATA_PROCESSING

    def __init__(self, **params):
        self.params = params

    @abstractmethod
    def fit(self, data: NodeData, rng: np.random.Generator) -> Dict[str, Any]:
        pass

    @abstractmethod
    def transform(self, state: Dict[str, Any], data: NodeData, fitting: bool) -> NodeData:
        """`fitting` is True on the pass over the training rows right after `fit`"""
        pass


class Model(Operation):
    """Supervised predictor; classifiers emit probabilities, regressors emit value columns"""

    kind = OperationKind.MODEL

    def fit(self, data: NodeData, rng: np.random.Generator) -> Dict[str, Any]:
        if data.target is None:
            raise DataShapeError(f"{self.operation_id} needs a target to fit")
        require_finite(data.features, self.operation_id)
        if data.task == TaskType.CLASSIFICATION:
            labels = np.asarray(data.target, dtype=np.int64)
            n_classes = max(data.n_classes, int(labels.max()) + 1, 2)
            return self.fit_classifier(data.features, labels, n_classes, rng)
        return self.fit_regressor(data.features, target_matrix(data.target), rng)

    def transform(self, state: Dict[str, Any], data: NodeData, fitting: bool) -> NodeData:
        require_finite(data.features, self.operation_id)
        if data.task == TaskType.CLASSIFICATION:
            raw = self.predict_proba(state, data.features)
            labels = np.argmax(raw, axis=1).astype(np.int64)
            proba = np.clip(raw, *PROBABILITY_CLIP)
            columns = proba[:, 1:2] if proba.shape[1] == 2 else proba
            return data.evolve(features=columns, labels=labels, probabilities=proba, stage=Stage.TABLE)
        values = self.predict_values(state, data.features)
        return data.evolve(features=values, labels=None, probabilities=None, stage=Stage.TABLE)

    def fit_classifier(self, features, labels, n_classes, rng) -> Dict[str, Any]:
        raise NotImplementedError(f"{self.operation_id} does not support classification")

    def fit_regressor(self, features, targets, rng) -> Dict[str, Any]:
        raise NotImplementedError(f"{self.operation_id} does not support regression")

    def predict_proba(self, state, features) -> np.ndarray:
        raise NotImplementedError

    def predict_values(self, state, features) -> np.ndarray:
        raise NotImplementedError


@dataclass
class FittedOperation:
    operation_id: str
    params: Dict[str, Any]
    state: Dict[str, Any]
    input_width: int
    output_width: int
    task: TaskType = TaskType.REGRESSION
    operation: Operation = field(repr=False, compare=False, default=None)

    def transform(self, data: NodeData, fitting: bool = False) -> NodeData:
        if data.width != self.input_width:
            raise SchemaMismatchError(self.input_width, data.width, where=f"{self.operation_id} input")
        return self.operation.transform(self.state, data, fitting)

    def to_record(self) -> Dict[str, Any]:
        return {
            "operation_id": self.operation_id,
            "params": dict(self.params),
            "state": self.state,
            "input_width": self.input_width,
            "output_width": self.output_width,
            "task": self.task.value,
        }
