"""
Fit and predict a pipeline by running its nodes in topological order.

Each node receives either the raw input (primary nodes) or its parents' outputs merged
according to its MergePolicy. Parent outputs concatenate in parent_ids order, then the
raw features when enrichment applies. Rows are aligned on their original indices.
"""

import logging
from dataclasses import dataclass, replace
from functools import reduce
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from dataio import Dataset, TaskType
from errors import DataShapeError, OperationFitError, PipeForgeError, SchemaMismatchError
from metrics import MetricValue, evaluate_table
from operations.base import FittedOperation, NodeData, Stage
from operations.registry import fit_operation, get_registry
from pipeline.graph import Pipeline
from pipeline.node import Node

logger = logging.getLogger(__name__)

# wrapped into OperationFitError with the original chained
NODE_FAILURES = (PipeForgeError, np.linalg.LinAlgError, ValueError, FloatingPointError, ZeroDivisionError, NotImplementedError)


@dataclass
class PredictionTable:
    """
    `values` is the prediction per input row: class labels for classification, the
    target estimate for regression, and for forecasting the `horizon` future values.
    """
    values: np.ndarray
    task: TaskType
    labels: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None
    idx: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def to_frame(self, class_names: Optional[List[str]] = None) -> pd.DataFrame:
        """`class_names` maps label codes back to the training labels"""
        if self.task == TaskType.CLASSIFICATION:
            if class_names:
                names = np.asarray(class_names, dtype=object)
                frame = pd.DataFrame({"label": names[self.labels]})
            else:
                frame = pd.DataFrame({"label": self.labels})
            for column in range(self.probabilities.shape[1]):
                suffix = class_names[column] if class_names and column < len(class_names) else column
                frame[f"proba_{suffix}"] = self.probabilities[:, column]
            return frame
        if self.task == TaskType.TS_FORECASTING:
            return pd.DataFrame({"step": np.arange(1, len(self.values) + 1), "forecast": self.values})
        return pd.DataFrame({"prediction": self.values})

    def write_csv(self, path: str, class_names: Optional[List[str]] = None):
        self.to_frame(class_names).to_csv(path, index=False, float_format="%.17g")


def merge_inputs(node: Node, parents: List[NodeData], raw: NodeData) -> NodeData:
    blocks = list(parents)
    if node.uses_raw_features and raw.stage == Stage.TABLE:
        blocks.append(raw)
    if len(blocks) == 1:
        return blocks[0].evolve(labels=None, probabilities=None)

    common = reduce(np.intersect1d, [block.idx for block in blocks])
    columns = []
    for block in blocks:
        order = np.argsort(block.idx, kind="stable")
        rows = order[np.searchsorted(block.idx[order], common)]
        columns.append(block.features[rows])
        if block is blocks[0]:
            first_rows = rows
    first = blocks[0]
    return first.evolve(
        features=np.hstack(columns),
        target=None if first.target is None else first.target[first_rows],
        idx=common,
        labels=None,
        probabilities=None,
    )


class FittedPipeline:
    """A pipeline plus the fitted state of every node; safe for concurrent predict"""

    def __init__(
        self,
        pipeline: Pipeline,
        operations: Dict[int, FittedOperation],
        registry,
        raw_width: int,
        task: TaskType,
        n_classes: int = 0,
        horizon: int = 1,
        feature_names: Optional[List[str]] = None,
        seed: int = 0,
        category_maps: Optional[Dict[str, Dict[str, int]]] = None,
        target_name: str = "target",
    ):
        self.pipeline = pipeline
        self.operations = operations
        self.registry = registry
        self.raw_width = raw_width
        self.task = TaskType.parse(task)
        self.n_classes = n_classes
        self.horizon = horizon
        self.feature_names = list(feature_names or [])
        self.seed = seed
        # training-time label encodings; prediction input must reuse them
        self.category_maps = {name: dict(mapping) for name, mapping in (category_maps or {}).items()}
        self.target_name = target_name

    @property
    def class_names(self) -> Optional[List[str]]:
        mapping = self.category_maps.get(self.target_name)
        if self.task != TaskType.CLASSIFICATION or not mapping:
            return None
        return [label for label, _ in sorted(mapping.items(), key=lambda item: item[1])]

    def fitted_operation(self, node_id: int) -> FittedOperation:
        return self.operations[node_id]

    def predict(self, data: Dataset) -> PredictionTable:
        return predict(self, data)

    def relabeled(self) -> "FittedPipeline":
        """Same fitted states, with the pipeline's dense canonical ids"""
        mapping = self.pipeline.relabel_mapping()
        return FittedPipeline(
            pipeline=self.pipeline.relabeled(),
            operations={mapping[node_id]: op for node_id, op in self.operations.items()},
            registry=self.registry,
            raw_width=self.raw_width,
            task=self.task,
            n_classes=self.n_classes,
            horizon=self.horizon,
            feature_names=self.feature_names,
            seed=self.seed,
            category_maps=self.category_maps,
            target_name=self.target_name,
        )

    def run(self, data: Dataset, until: Optional[int] = None) -> NodeData:
        """Output of node `until` (default: the sink) on new data"""
        if data.n_features != self.raw_width:
            raise SchemaMismatchError(self.raw_width, data.n_features)
        raw = NodeData.from_dataset(data, with_target=False)
        return self.run_raw(raw.evolve(n_classes=self.n_classes, horizon=self.horizon), until)

    def run_raw(self, raw: NodeData, until: Optional[int] = None, fitting: bool = False) -> NodeData:
        """Run on a raw-stage packet; `fitting` replays the training pass (row filters, lag windows)"""
        pipeline = self.pipeline if until is None else self.pipeline.subgraph(until)
        outputs: Dict[int, NodeData] = {}
        for node_id in pipeline.topological_order():
            node = pipeline.node(node_id)
            inputs = raw if node.is_primary else merge_inputs(node, [outputs[p] for p in node.parent_ids], raw)
            try:
                outputs[node_id] = self.operations[node_id].transform(inputs, fitting=fitting)
            except SchemaMismatchError:
                raise
            except NODE_FAILURES as exc:
                raise OperationFitError(node_id, f"{node.operation_id} failed to predict: {exc}") from exc
        return outputs[pipeline.final_node_id]


def node_rng(seed: int, node_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(node_id)])


def fit(pipeline: Pipeline, data: Dataset, seed: int = 0, registry=None) -> FittedPipeline:
    """Fit every node in topological order; identical inputs give bit-identical states"""
    registry = registry or get_registry()
    if data.features.shape[0] != data.target.shape[0]:
        raise DataShapeError(f"{data.features.shape[0]} feature rows for {data.target.shape[0]} targets")
    if pipeline.task is not None and pipeline.task != data.task:
        raise DataShapeError(f"pipeline declared for {pipeline.task.value}, data is {data.task.value}")
    fitted = fit_raw(pipeline, NodeData.from_dataset(data), seed, registry, data.feature_names)
    fitted.category_maps = {name: dict(mapping) for name, mapping in data.category_maps.items()}
    fitted.target_name = data.target_name
    return fitted


def fit_raw(pipeline: Pipeline, raw: NodeData, seed: int = 0, registry=None, feature_names=None) -> FittedPipeline:
    """Fit on a raw-stage packet that carries its target"""
    registry = registry or get_registry()
    if pipeline.final_node_id is None:
        raise DataShapeError("pipeline has no unique final node")
    operations: Dict[int, FittedOperation] = {}
    outputs: Dict[int, NodeData] = {}
    for node_id in pipeline.topological_order():
        node = pipeline.node(node_id)
        inputs = raw if node.is_primary else merge_inputs(node, [outputs[p] for p in node.parent_ids], raw)
        try:
            spec = registry.get(node.operation_id)
            fitted, output = fit_operation(spec, node.hyperparams, inputs, node_rng(seed, node_id))
        except NODE_FAILURES as exc:
            raise OperationFitError(node_id, f"{node.operation_id}: {exc}") from exc
        operations[node_id] = fitted
        outputs[node_id] = output
        logger.debug("fitted node %d (%s) -> width %d", node_id, node.operation_id, output.width)

    return FittedPipeline(
        pipeline=pipeline,
        operations=operations,
        registry=registry,
        raw_width=raw.width,
        task=raw.task,
        n_classes=raw.n_classes,
        horizon=raw.horizon,
        feature_names=feature_names,
        seed=seed,
    )


def predict(fitted: FittedPipeline, data: Dataset) -> PredictionTable:
    """
    Tabular tasks return one prediction per input row. For forecasting, `data` is the
    history and the table holds the next `horizon` values after its last point.
    """
    output = fitted.run(data)
    if fitted.task == TaskType.CLASSIFICATION:
        if output.labels is None:
            raise DataShapeError("final node produced no class labels")
        return PredictionTable(
            values=output.labels.astype(np.float64),
            task=fitted.task,
            labels=output.labels,
            probabilities=output.probabilities,
            idx=output.idx,
        )
    if fitted.task == TaskType.TS_FORECASTING:
        return PredictionTable(values=output.features[-1].astype(np.float64), task=fitted.task, idx=output.idx)
    return PredictionTable(values=output.features[:, 0].astype(np.float64), task=fitted.task, idx=output.idx)


def forecast_windows(train: Dataset, test: Dataset, horizon: int):
    """
    Walk-forward windows over `test`: yields (history, start, stop) where history is the
    series up to test row `start` and [start, stop) is the next forecast window.
    """
    series = np.concatenate([train.target, test.target])
    step = max(1, int(horizon))
    for start in range(0, test.n_rows, step):
        end = train.n_rows + start
        history = replace(train, features=series[:end].reshape(-1, 1), target=series[:end])
        yield history, start, min(start + step, test.n_rows)


def rolling_forecast(fitted: FittedPipeline, train: Dataset, test: Dataset) -> np.ndarray:
    """One forecast per test point, each window forecast from everything before it"""
    forecasts = [
        predict(fitted, history).values[: stop - start]
        for history, start, stop in forecast_windows(train, test, fitted.horizon)
    ]
    return np.concatenate(forecasts)


def score_fitted(fitted: FittedPipeline, train: Dataset, test: Dataset, metric) -> MetricValue:
    """Score on the test rows; series are forecast walk-forward across the whole test tail"""
    if fitted.task == TaskType.TS_FORECASTING:
        table = PredictionTable(values=rolling_forecast(fitted, train, test), task=fitted.task)
        return evaluate_table(metric, table, test.target)
    return evaluate_table(metric, predict(fitted, test), test.target)


def evaluate_pipeline(pipeline: Pipeline, train: Dataset, test: Dataset, metric, seed: int = 0, registry=None) -> MetricValue:
    """Fit on train, score on test"""
    return score_fitted(fit(pipeline, train, seed, registry), train, test, metric)
