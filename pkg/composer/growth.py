"""
Random pipeline growth, backward from a model sink, respecting data stages: every
parent emits the stage its child accepts and primary nodes read the raw stage.
"""

import logging
from typing import Callable, List, Optional

import numpy as np

from composer.config import ComposerConfig
from composer.individual import Individual
from dataio import TaskType
from errors import InitialAssumptionInvalidError
from operations.base import Stage
from pipeline.graph import Pipeline, canonical_signature
from pipeline.node import MergePolicy, Node, StructureClass
from settings import REPRODUCTION_RETRIES

logger = logging.getLogger(__name__)


class PipelineGrower:
    def __init__(self, registry, task, config: ComposerConfig, validate_fn: Callable):
        self.registry = registry
        self.task = TaskType.parse(task)
        self.config = config
        self.validate_fn = validate_fn
        self.specs = registry.filter(config.tags_include, config.tags_exclude, self.task)
        self.raw_stage = Stage.SERIES if self.task == TaskType.TS_FORECASTING else Stage.TABLE
        if not any(spec.is_model for spec in self.specs):
            raise ValueError(f"no model operation available for {self.task.value}")

    def options(self, emits: Stage, primary: bool, model_only: bool = False, accepts: Optional[Stage] = None):
        return [
            spec
            for spec in self.specs
            if spec.emits == emits
            and (not primary or spec.accepts == self.raw_stage)
            and (accepts is None or spec.accepts == accepts)
            and (not model_only or spec.is_model)
        ]

    def arity(self, rng: np.random.Generator) -> int:
        if self.config.structure_class == StructureClass.LINEAR:
            return 1
        return int(rng.integers(1, max(1, self.config.max_arity) + 1))

    def grow_node(self, rng, nodes: List[Node], emits: Stage, remaining: int, model_only: bool = False, next_id: int = 0) -> int:
        """Append a subtree whose root emits `emits`; returns the root id. Raises LookupError"""
        primary = remaining <= 1
        options = self.options(emits, primary, model_only)
        if not options and not primary:
            options = self.options(emits, True, model_only)
            primary = True
        if not options:
            raise LookupError(f"no operation emits {emits.value}")
        spec = options[int(rng.integers(len(options)))]
        node_id = next_id + len(nodes)
        nodes.append(None)
        slot = len(nodes) - 1

        parents = []
        if not primary:
            count = self.arity(rng)
            try:
                for position in range(count):
                    if self.config.structure_class == StructureClass.ENSEMBLE or position == 0:
                        depth = remaining - 1
                    else:
                        depth = int(rng.integers(1, remaining))
                    parents.append(self.grow_node(rng, nodes, spec.accepts, depth, next_id=next_id))
            except LookupError:
                if spec.accepts != self.raw_stage:
                    raise
                del nodes[slot + 1:]
                parents = []
        nodes[slot] = Node(node_id, spec.operation_id, {}, tuple(parents), MergePolicy.ADAPTIVE, False)
        return node_id

    def grow(self, rng: np.random.Generator, depth: Optional[int] = None) -> Pipeline:
        for _ in range(REPRODUCTION_RETRIES):
            target_depth = depth or int(rng.integers(1, self.config.max_depth + 1))
            nodes: List[Node] = []
            try:
                self.grow_node(rng, nodes, Stage.TABLE, target_depth, model_only=True)
            except LookupError:
                continue
            pipeline = Pipeline(nodes, self.task).relabeled()
            if self.validate_fn(pipeline):
                return pipeline
        return self.minimal()

    def minimal(self) -> Pipeline:
        """Smallest valid pipeline: a lone model, or a raw-stage adapter feeding a model"""
        for spec in self.options(Stage.TABLE, True, model_only=True):
            pipeline = Pipeline([Node(0, spec.operation_id)], self.task)
            if self.validate_fn(pipeline):
                return pipeline
        for adapter in self.options(Stage.TABLE, True):
            for model in self.options(Stage.TABLE, False, model_only=True, accepts=Stage.TABLE):
                pipeline = Pipeline([Node(0, adapter.operation_id), Node(1, model.operation_id, {}, (0,))], self.task)
                if self.validate_fn(pipeline):
                    return pipeline
        raise LookupError(f"no valid pipeline can be built for {self.task.value}")


def init_population(registry, config: ComposerConfig, task, rng: np.random.Generator, validate_fn: Callable, grower: Optional[PipelineGrower] = None) -> List[Individual]:
    """Initial assumptions first (validated, never dropped), then random growth"""
    grower = grower or PipelineGrower(registry, task, config, validate_fn)
    population: List[Individual] = []
    seen = set()
    for assumption in config.initial_pipelines:
        assumption = assumption if assumption.task is not None else assumption.with_task(task)
        result = validate_fn(assumption)
        if not result:
            raise InitialAssumptionInvalidError(assumption, result.rule)
        signature = canonical_signature(assumption, registry)
        seen.add(signature)
        population.append(Individual(assumption, signature=signature, origin="initial_assumption"))

    attempts = 0
    while len(population) < config.pop_size:
        pipeline = grower.grow(rng)
        signature = canonical_signature(pipeline, registry)
        attempts += 1
        if signature in seen and attempts < config.pop_size * 10:
            continue
        seen.add(signature)
        population.append(Individual(pipeline, signature=signature, origin="random"))
    return population[: max(config.pop_size, len(config.initial_pipelines))]
