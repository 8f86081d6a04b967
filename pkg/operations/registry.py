"""
Operation registry: OperationSpec records loaded from JSON and bound to their
implementations, tag filtering, and single-operation fit/predict helpers.
"""

import json
import logging
import os
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

import settings
from dataio import TaskType
from errors import DataShapeError, InvalidHyperparamError, UnknownOperationError
from operations.base import FittedOperation, NodeData, Operation, OperationKind, Stage
from operations.hyperparams import parse_domain
from operations.linear_models import LogisticRegression, OrdinaryLeastSquares, Ridge
from operations.neighbors import GaussianNaiveBayes, KNearestNeighbors
from operations.preprocessing import (
    MeanImputation,
    MergeConcat,
    MinMaxScaling,
    PcaTopK,
    StandardScaling,
    ZScoreOutlierFilter,
)
from operations.timeseries import LaggedTransform, MovingAverageSmoothing
from operations.tree import DecisionTree

logger = logging.getLogger(__name__)

IMPLEMENTATIONS: Dict[str, Callable[..., Operation]] = {
    cls.operation_id: cls
    for cls in (
        OrdinaryLeastSquares,
        Ridge,
        LogisticRegression,
        DecisionTree,
        KNearestNeighbors,
        GaussianNaiveBayes,
        StandardScaling,
        MinMaxScaling,
        MeanImputation,
        ZScoreOutlierFilter,
        PcaTopK,
        LaggedTransform,
        MovingAverageSmoothing,
        MergeConcat,
    )
}


@dataclass(frozen=True)
class OperationSpec:
    operation_id: str
    display_name: str
    kind: OperationKind
    tags: FrozenSet[str]
    tasks: FrozenSet[TaskType]
    hyperparam_space: Dict[str, Any] = field(default_factory=dict, hash=False)
    defaults: Dict[str, Any] = field(default_factory=dict, hash=False)
    accepts: Stage = Stage.TABLE
    emits: Stage = Stage.TABLE
    node_count: int = 1
    factory: Optional[Callable[..., Operation]] = field(default=None, compare=False, repr=False, hash=False)

    @property
    def is_model(self) -> bool:
        return self.kind in (OperationKind.MODEL, OperationKind.TASK_SPECIFIC_MODEL)

    @property
    def is_tunable(self) -> bool:
        return bool(self.hyperparam_space)

    def supports(self, task) -> bool:
        return TaskType.parse(task) in self.tasks

    def params_problem(self, params: Dict[str, Any]) -> Optional[Tuple[str, Any, str]]:
        """First (name, value, reason) that falls outside the declared space, if any"""
        for name in sorted(params):
            value = params[name]
            domain = self.hyperparam_space.get(name)
            if domain is None:
                return name, value, "not a hyperparameter of this operation"
            if not domain.contains(value):
                return name, value, f"outside {domain.to_dict()}"
        return None

    def full_params(self, custom: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        merged = dict(self.defaults)
        merged.update(custom or {})
        return {name: merged[name] for name in sorted(merged)}

    def create(self, custom: Optional[Dict[str, Any]] = None) -> Operation:
        custom = dict(custom or {})
        problem = self.params_problem(custom)
        if problem is not None:
            raise InvalidHyperparamError(self.operation_id, *problem)
        params = self.full_params(custom)
        for name, value in list(params.items()):
            params[name] = self.hyperparam_space[name].coerce(value)
        return self.factory(**params)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "operation_id": self.operation_id,
            "display_name": self.display_name,
            "kind": self.kind.value,
            "tags": sorted(self.tags),
            "tasks": sorted(task.value for task in self.tasks),
            "accepts": self.accepts.value,
            "emits": self.emits.value,
            "hyperparam_space": {name: self.hyperparam_space[name].to_dict() for name in sorted(self.hyperparam_space)},
            "defaults": dict(sorted(self.defaults.items())),
        }


def parse_spec(record: Dict[str, Any]) -> OperationSpec:
    operation_id = record["operation_id"]
    factory = IMPLEMENTATIONS.get(operation_id)
    if factory is None:
        raise UnknownOperationError(operation_id)
    space = {name: parse_domain(domain) for name, domain in record.get("hyperparam_space", {}).items()}
    spec = OperationSpec(
        operation_id=operation_id,
        display_name=record.get("display_name", operation_id),
        kind=OperationKind(record["kind"]),
        tags=frozenset(record.get("tags", [])),
        tasks=frozenset(TaskType.parse(task) for task in record["tasks"]),
        hyperparam_space=space,
        defaults=dict(record.get("defaults", {})),
        accepts=Stage(record.get("accepts", "table")),
        emits=Stage(record.get("emits", "table")),
        factory=factory,
    )
    problem = spec.params_problem(spec.defaults)
    if problem is not None:
        raise InvalidHyperparamError(operation_id, *problem)
    return spec


class OperationRegistry:
    """Immutable collection of OperationSpec; extensions return new registries"""

    def __init__(self, specs: Iterable[OperationSpec], source: Optional[str] = None):
        self._specs: Dict[str, OperationSpec] = {}
        for spec in specs:
            self._specs[spec.operation_id] = spec
        self.source = source

    def __contains__(self, operation_id: str) -> bool:
        return operation_id in self._specs

    def __iter__(self):
        return iter(self.specs())

    def __len__(self) -> int:
        return len(self._specs)

    @property
    def ids(self) -> List[str]:
        return sorted(self._specs)

    def specs(self) -> List[OperationSpec]:
        return [self._specs[operation_id] for operation_id in self.ids]

    def get(self, operation_id: str) -> OperationSpec:
        try:
            return self._specs[operation_id]
        except KeyError:
            raise UnknownOperationError(operation_id) from None

    def filter(self, tags_include=None, tags_exclude=None, task=None, kinds=None) -> List[OperationSpec]:
        include = set(tags_include or ())
        exclude = set(tags_exclude or ())
        task = None if task is None else TaskType.parse(task)
        selected = []
        for spec in self.specs():
            if task is not None and task not in spec.tasks:
                continue
            if include and not (spec.tags & include):
                continue
            if spec.tags & exclude:
                continue
            if kinds is not None and spec.kind not in kinds:
                continue
            selected.append(spec)
        return selected

    def restricted(self, operation_ids: Iterable[str]) -> "OperationRegistry":
        return OperationRegistry([self.get(operation_id) for operation_id in operation_ids], self.source)

    def with_operation(self, spec: OperationSpec, factory: Optional[Callable[..., Operation]] = None) -> "OperationRegistry":
        if factory is not None:
            spec = replace(spec, factory=factory)
        if spec.factory is None:
            raise ValueError(f"operation {spec.operation_id} has no implementation")
        return OperationRegistry(list(self._specs.values()) + [spec], self.source)

    def to_dict(self) -> Dict[str, Any]:
        return {"version": 1, "operations": [spec.to_dict() for spec in self.specs()]}


def registry_filter(registry: OperationRegistry, tags_include=None, tags_exclude=None, task=None) -> List[OperationSpec]:
    return registry.filter(tags_include, tags_exclude, task)


def load_registry(path: str) -> OperationRegistry:
    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    specs = [parse_spec(record) for record in document.get("operations", [])]
    logger.debug("loaded %d operations from %s", len(specs), path)
    return OperationRegistry(specs, source=path)


# Loaded registries, one per resolved path
_registries: Dict[str, OperationRegistry] = {}
_registries_lock = threading.Lock()


def get_registry() -> OperationRegistry:
    """Registry at $PIPEFORGE_REGISTRY, or the bundled one"""
    path = os.path.abspath(settings.registry_path())
    with _registries_lock:
        if path not in _registries:
            _registries[path] = load_registry(path)
        return _registries[path]


def fit_operation(spec: OperationSpec, params: Dict[str, Any], data: NodeData, rng: np.random.Generator):
    """Fit one operation and run it over its training rows: (FittedOperation, output)"""
    operation = spec.create(params)
    state = operation.fit(data, rng)
    output = operation.transform(state, data, fitting=True)
    fitted = FittedOperation(
        operation_id=spec.operation_id,
        params=spec.full_params(params),
        state=state,
        input_width=data.width,
        output_width=output.width,
        task=data.task,
        operation=operation,
    )
    return fitted, output


def _node_data(spec: OperationSpec, features, target, task, horizon, n_classes=0) -> NodeData:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    if task is None:
        task = TaskType.REGRESSION if TaskType.REGRESSION in spec.tasks else sorted(spec.tasks)[0]
    task = TaskType.parse(task)
    if target is not None:
        target = np.asarray(target, dtype=np.int64 if task == TaskType.CLASSIFICATION else np.float64)
        if target.shape[0] != features.shape[0]:
            raise DataShapeError(f"features have {features.shape[0]} rows but target has {target.shape[0]}")
        if task == TaskType.CLASSIFICATION and not n_classes:
            n_classes = int(target.max()) + 1
    return NodeData(
        features=features,
        target=target,
        idx=np.arange(features.shape[0]),
        task=task,
        n_classes=n_classes,
        horizon=horizon,
        stage=spec.accepts,
    )


def op_fit_transform(spec: OperationSpec, hyperparams, features, target, seed: int = 0, task=None, horizon: int = 1):
    data = _node_data(spec, features, target, task, horizon)
    return fit_operation(spec, dict(hyperparams or {}), data, np.random.default_rng(seed))


def op_fit(spec: OperationSpec, hyperparams, features, target, seed: int = 0, task=None, horizon: int = 1) -> FittedOperation:
    fitted, _ = op_fit_transform(spec, hyperparams, features, target, seed, task, horizon)
    return fitted


def op_predict(fitted: FittedOperation, features) -> np.ndarray:
    """
    Data operations return the transformed matrix; regressors return value columns;
    classifiers return the label column followed by one probability column per class.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    data = NodeData(features=features, target=None, idx=np.arange(features.shape[0]), task=fitted.task)
    output = fitted.transform(data, fitting=False)
    if output.labels is not None:
        return np.column_stack([output.labels.astype(np.float64), output.probabilities])
    return output.features


def restore_operation(registry: OperationRegistry, record: Dict[str, Any]) -> FittedOperation:
    """Rebuild a FittedOperation from `FittedOperation.to_record` output"""
    spec = registry.get(record["operation_id"])
    params = dict(record.get("params", {}))
    return FittedOperation(
        operation_id=spec.operation_id,
        params=spec.full_params(params),
        state=record["state"],
        input_width=int(record["input_width"]),
        output_width=int(record["output_width"]),
        task=TaskType.parse(record["task"]),
        operation=spec.create(params),
    )
