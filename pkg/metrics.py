"""
Quality metrics and their conversion to maximization fitness.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.metrics import f1_score, mean_absolute_error, mean_squared_error, roc_auc_score

from dataio import TaskType
from errors import DataShapeError, DegenerateClassError, ZeroDenominatorError


class Metric(str, Enum):
    MAE = "MAE"
    RMSE = "RMSE"
    F1 = "F1"
    ROC_AUC = "ROC_AUC"
    MAPE = "MAPE"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        return cls(str(value).strip().upper().replace("-", "_"))

    @property
    def higher_is_better(self) -> bool:
        return self in (Metric.F1, Metric.ROC_AUC)

    @property
    def tasks(self):
        if self in (Metric.F1, Metric.ROC_AUC):
            return {TaskType.CLASSIFICATION}
        return {TaskType.REGRESSION, TaskType.TS_FORECASTING}


DEFAULT_METRICS = {
    TaskType.CLASSIFICATION: Metric.ROC_AUC,
    TaskType.REGRESSION: Metric.RMSE,
    TaskType.TS_FORECASTING: Metric.MAPE,
}


def default_metric(task) -> Metric:
    return DEFAULT_METRICS[TaskType.parse(task)]


@dataclass(frozen=True)
class MetricValue:
    metric: Metric
    value: float

    @property
    def higher_is_better(self) -> bool:
        return self.metric.higher_is_better

    @property
    def fitness(self) -> float:
        return to_fitness_score(self)

    def to_dict(self):
        return {"metric": self.metric.value, "value": self.value, "higher_is_better": self.higher_is_better}


def _flat(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).ravel()


def _roc_auc(predictions, truth) -> float:
    truth = np.asarray(truth).astype(np.int64).ravel()
    if np.unique(truth).size < 2:
        raise DegenerateClassError("ROC-AUC needs at least two classes present in the truth")
    scores = np.asarray(predictions, dtype=np.float64)
    if scores.ndim == 2 and scores.shape[1] == 1:
        scores = scores[:, 0]
    if scores.ndim == 2 and scores.shape[1] == 2:
        scores = scores[:, 1]
    try:
        if scores.ndim == 1:
            return float(roc_auc_score(truth, scores))
        labels = list(range(scores.shape[1]))
        return float(roc_auc_score(truth, scores, multi_class="ovr", average="macro", labels=labels))
    except ValueError as exc:
        raise DegenerateClassError(str(exc)) from exc


def _f1(predictions, truth) -> float:
    labels = np.asarray(predictions).astype(np.int64).ravel()
    truth = np.asarray(truth).astype(np.int64).ravel()
    seen = np.union1d(labels, truth)
    average = "binary" if seen.size <= 2 and seen.max() <= 1 else "macro"
    return float(f1_score(truth, labels, average=average, zero_division=0))


def evaluate_metric(metric, predictions, truth) -> MetricValue:
    """
    Score predictions against truth. ROC_AUC takes class probabilities (one column
    per class, or the positive-class column); F1 takes labels; the rest take values.
    """
    metric = Metric.parse(metric)
    n_pred = np.asarray(predictions).shape[0]
    n_truth = np.asarray(truth).shape[0]
    if n_pred != n_truth:
        raise DataShapeError(f"{n_pred} predictions for {n_truth} truth values")
    if n_truth == 0:
        raise DataShapeError("cannot score an empty prediction set")

    if metric == Metric.ROC_AUC:
        return MetricValue(metric, _roc_auc(predictions, truth))
    if metric == Metric.F1:
        return MetricValue(metric, _f1(predictions, truth))

    predicted = _flat(predictions)
    actual = _flat(truth)
    if predicted.size != actual.size:
        raise DataShapeError(f"{predicted.size} predicted values for {actual.size} truth values")
    if metric == Metric.MAE:
        value = mean_absolute_error(actual, predicted)
    elif metric == Metric.RMSE:
        value = np.sqrt(mean_squared_error(actual, predicted))
    else:
        if np.any(actual == 0.0):
            raise ZeroDenominatorError("MAPE is undefined when a truth value is zero")
        value = np.mean(np.abs((actual - predicted) / actual)) * 100.0
    return MetricValue(metric, float(value))


def evaluate_table(metric, table, truth) -> MetricValue:
    """Score a prediction table, picking labels, probabilities or values as the metric needs"""
    metric = Metric.parse(metric)
    if metric == Metric.ROC_AUC:
        if table.probabilities is None:
            raise DataShapeError("ROC_AUC needs class probabilities")
        return evaluate_metric(metric, table.probabilities, truth)
    if metric == Metric.F1:
        return evaluate_metric(metric, table.labels, truth)
    return evaluate_metric(metric, table.values, truth)


def to_fitness_score(metric_value: MetricValue) -> float:
    """Identity for F1/ROC_AUC, 1/(1+v) for error metrics"""
    if metric_value.higher_is_better:
        return float(metric_value.value)
    return 1.0 / (1.0 + float(metric_value.value))
