"""
Atomization: a fitted pipeline wrapped as one model operation that can sit inside
other pipelines, and incremental adaptation that re-composes around such a block.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Dict, Optional, Tuple

import numpy as np

from composer.config import ComposerConfig
from composer.evolution import compose
from composer.individual import ParetoFront
from dataio import Dataset, TaskType
from errors import DataShapeError
from operations.base import NodeData, Operation, OperationKind, Stage
from operations.registry import OperationRegistry, OperationSpec, get_registry, restore_operation
from pipeline.executor import FittedPipeline, PredictionTable, fit_raw
from pipeline.graph import Pipeline, canonical_signature
from pipeline.node import Node

logger = logging.getLogger(__name__)

ATOMIZED_PREFIX = "atomized_"


def fitted_to_state(fitted: FittedPipeline) -> Dict[str, Any]:
    return {
        "raw_width": fitted.raw_width,
        "n_classes": fitted.n_classes,
        "horizon": fitted.horizon,
        "seed": fitted.seed,
        "operations": {str(node_id): op.to_record() for node_id, op in sorted(fitted.operations.items())},
    }


def fitted_from_state(pipeline: Pipeline, state: Dict[str, Any], registry: OperationRegistry) -> FittedPipeline:
    operations = {int(node_id): restore_operation(registry, record) for node_id, record in state["operations"].items()}
    return FittedPipeline(
        pipeline=pipeline,
        operations=operations,
        registry=registry,
        raw_width=int(state["raw_width"]),
        task=pipeline.task,
        n_classes=int(state["n_classes"]),
        horizon=int(state["horizon"]),
        seed=int(state["seed"]),
    )


class AtomizedModel(Operation):
    """
    Runs the inner pipeline as a single model. Frozen by default: `fit` keeps the inner
    fitted states; with `refit` it refits the inner pipeline on the rows it receives.
    """

    kind = OperationKind.MODEL

    def __init__(self, inner: Pipeline, inner_registry: OperationRegistry, prefitted: Optional[FittedPipeline] = None,
                 refit: bool = False, operation_id: str = "", **params):
        super().__init__(**params)
        self.inner = inner
        self.inner_registry = inner_registry
        self.prefitted = prefitted
        self.refit = refit
        self.operation_id = operation_id

    def fit(self, data: NodeData, rng: np.random.Generator) -> Dict[str, Any]:
        if self.prefitted is not None and not self.refit:
            if data.width != self.prefitted.raw_width:
                raise DataShapeError(f"{self.operation_id} expects {self.prefitted.raw_width} columns, got {data.width}")
            return fitted_to_state(self.prefitted)
        seed = int(rng.integers(2**31))
        return fitted_to_state(fit_raw(self.inner, data, seed, self.inner_registry))

    def transform(self, state: Dict[str, Any], data: NodeData, fitting: bool) -> NodeData:
        fitted = fitted_from_state(self.inner, state, self.inner_registry)
        output = fitted.run_raw(data, fitting=fitting)
        return output.evolve(task=data.task, n_classes=data.n_classes, horizon=data.horizon)


def inner_node_count(pipeline: Pipeline, registry: OperationRegistry) -> int:
    return sum(registry.get(node.operation_id).node_count if node.operation_id in registry else 1 for node in pipeline.nodes)


@dataclass
class AtomizedOperation:
    inner: Pipeline
    inner_registry: OperationRegistry
    fitted: Optional[FittedPipeline] = None
    refit: bool = False
    name: Optional[str] = None
    spec: OperationSpec = field(init=False, repr=False)

    def __post_init__(self):
        if self.inner.task is None:
            raise ValueError("atomized pipelines must declare their task")
        operation_id = self.name or ATOMIZED_PREFIX + canonical_signature(self.inner, self.inner_registry)[:12]
        raw_stage = Stage.SERIES if self.inner.task == TaskType.TS_FORECASTING else Stage.TABLE
        factory = partial(
            AtomizedModel,
            inner=self.inner,
            inner_registry=self.inner_registry,
            prefitted=self.fitted,
            refit=self.refit,
            operation_id=operation_id,
        )
        self.spec = OperationSpec(
            operation_id=operation_id,
            display_name=f"atomized pipeline ({len(self.inner)} nodes)",
            kind=OperationKind.MODEL,
            tags=frozenset({"atomized"}),
            tasks=frozenset({self.inner.task}),
            accepts=raw_stage,
            emits=Stage.TABLE,
            node_count=inner_node_count(self.inner, self.inner_registry),
            factory=factory,
        )

    @property
    def operation_id(self) -> str:
        return self.spec.operation_id

    @property
    def node_count(self) -> int:
        return self.spec.node_count

    def register(self, registry: Optional[OperationRegistry] = None) -> OperationRegistry:
        """`registry` extended with this operation and any atomized operations nested inside it"""
        registry = registry or get_registry()
        for spec in self.inner_registry.specs():
            if spec.operation_id.startswith(ATOMIZED_PREFIX) and spec.operation_id not in registry:
                registry = registry.with_operation(spec)
        return registry.with_operation(self.spec)

    def wrapper_pipeline(self) -> Pipeline:
        """One-node pipeline whose only node is this operation"""
        return Pipeline([Node(0, self.operation_id)], self.inner.task)

    def fitted_wrapper(self) -> FittedPipeline:
        """The wrapper pipeline with this block already fitted"""
        if self.fitted is None:
            raise ValueError(f"{self.operation_id} wraps an unfitted pipeline")
        registry = self.register(self.inner_registry)
        sink = self.fitted.operations[self.inner.final_node_id]
        record = {
            "operation_id": self.operation_id,
            "params": {},
            "state": fitted_to_state(self.fitted),
            "input_width": self.fitted.raw_width,
            "output_width": sink.output_width,
            "task": self.inner.task.value,
        }
        return FittedPipeline(
            pipeline=self.wrapper_pipeline(),
            operations={0: restore_operation(registry, record)},
            registry=registry,
            raw_width=self.fitted.raw_width,
            task=self.inner.task,
            n_classes=self.fitted.n_classes,
            horizon=self.fitted.horizon,
            feature_names=self.fitted.feature_names,
            seed=self.fitted.seed,
            category_maps=self.fitted.category_maps,
            target_name=self.fitted.target_name,
        )

    def predict(self, data: Dataset) -> PredictionTable:
        return self.fitted_wrapper().predict(data)


def atomize(fitted_pipeline: FittedPipeline, refit: bool = False, name: Optional[str] = None) -> AtomizedOperation:
    # dense ids keep the inner states aligned with the nested document after export
    fitted_pipeline = fitted_pipeline.relabeled()
    pipeline = fitted_pipeline.pipeline
    if pipeline.task is None:
        pipeline = pipeline.with_task(fitted_pipeline.task)
        fitted_pipeline.pipeline = pipeline
    atomized = AtomizedOperation(pipeline, fitted_pipeline.registry, fitted_pipeline, refit, name)
    logger.info("atomized %d-node pipeline as %s", len(pipeline), atomized.operation_id)
    return atomized


def adaptation_registry(fitted_pipeline: FittedPipeline, registry=None, refit: bool = True) -> Tuple[AtomizedOperation, OperationRegistry]:
    """The atomized old pipeline and `registry` extended with it"""
    atomized = atomize(fitted_pipeline, refit=refit)
    return atomized, atomized.register(registry or fitted_pipeline.registry)


def adapt(fitted_pipeline: FittedPipeline, new_data: Dataset, config: Optional[ComposerConfig] = None, registry=None,
          refit: bool = True) -> ParetoFront:
    """
    Compose on new data with the old pipeline available as one atomized block, seeded
    into generation 0 as a one-node initial assumption.
    """
    if new_data.task != fitted_pipeline.task:
        raise DataShapeError(f"pipeline was fitted for {fitted_pipeline.task.value}, new data is {new_data.task.value}")
    if new_data.n_features != fitted_pipeline.raw_width:
        raise DataShapeError(f"pipeline expects {fitted_pipeline.raw_width} columns, new data has {new_data.n_features}")
    config = config or ComposerConfig()
    atomized, extended = adaptation_registry(fitted_pipeline, registry, refit)
    seeded = replace(config, initial_pipelines=[atomized.wrapper_pipeline()] + list(config.initial_pipelines))
    return compose(seeded, new_data, extended)


def atomized_source(spec: OperationSpec) -> Optional[Tuple[Pipeline, OperationRegistry, bool]]:
    """(inner pipeline, inner registry, refit) when `spec` wraps a pipeline, else None"""
    factory = spec.factory
    if not isinstance(factory, partial) or factory.func is not AtomizedModel:
        return None
    keywords = factory.keywords
    return keywords["inner"], keywords["inner_registry"], bool(keywords.get("refit", False))
