"""
Hyperparameter tuning of a fixed-topology pipeline.

Three strategies:
    serial_isolated  each node in topological order, scored on its own subtree only
    sequential       each node in topological order, scored on the whole pipeline
    simultaneous     the joint space of every node, scored on the whole pipeline

Every strategy keeps the best assignment seen and never returns a pipeline that scores
worse than its input on the validation split.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from dataio import Dataset, TaskType, split
from errors import PipeForgeError, UntunableError
from metrics import Metric, default_metric, to_fitness_score
from operations.base import Stage
from operations.hyperparams import sample_space
from operations.registry import get_registry
from pipeline.executor import fit, score_fitted
from pipeline.graph import Pipeline
from pipeline.node import Node
from settings import PERTURB_EVERY, TUNING_ITERATIONS

logger = logging.getLogger(__name__)

WORST_FITNESS = 0.0
TUNING_FAILURES = (PipeForgeError, ValueError, FloatingPointError, ArithmeticError)

History = List[Tuple[Dict[str, Any], float]]


class TuningStrategy(str, Enum):
    SERIAL_ISOLATED = "serial_isolated"
    SEQUENTIAL = "sequential"
    SIMULTANEOUS = "simultaneous"


def propose_candidate(space: Dict[str, Any], history: History, seed: int = 0) -> Dict[str, Any]:
    """
    Random search honoring each dimension's scale. Every PERTURB_EVERY-th call perturbs
    the incumbent instead. Pure in (space, history, seed).
    """
    if not space:
        raise ValueError("cannot propose from an empty space")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, len(history)])
    if history and (len(history) + 1) % PERTURB_EVERY == 0:
        incumbent = max(history, key=lambda entry: entry[1])[0]
        return {
            name: space[name].perturb(incumbent[name], rng) if name in incumbent else space[name].sample(rng)
            for name in sorted(space)
        }
    return sample_space(space, rng)


@dataclass
class TuningConfig:
    strategy: TuningStrategy = TuningStrategy.SIMULTANEOUS
    iterations: int = TUNING_ITERATIONS
    metric: Optional[Metric] = None
    seed: int = 0
    validation_split: float = 0.25
    sampler: Callable = field(default=propose_candidate, repr=False)

    def __post_init__(self):
        self.strategy = TuningStrategy(self.strategy)
        if self.metric is not None:
            self.metric = Metric.parse(self.metric)
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError(f"validation_split must lie in (0, 1), got {self.validation_split}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy.value,
            "iterations": self.iterations,
            "metric": self.metric.value if self.metric else None,
            "seed": self.seed,
            "validation_split": self.validation_split,
        }


@dataclass
class TuningReport:
    strategy: str
    iterations: int
    metric: str
    metric_before: Optional[float] = None
    metric_after: Optional[float] = None
    fitness_before: float = WORST_FITNESS
    fitness_after: float = WORST_FITNESS
    full_evaluations: int = 0
    isolated_evaluations: int = 0
    verification_evaluations: int = 0
    untunable: bool = False
    reverted: bool = False
    changes: Dict[int, Dict[str, List[Any]]] = field(default_factory=dict)

    @property
    def improvement(self) -> float:
        return self.fitness_after - self.fitness_before

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy,
            "iterations": self.iterations,
            "metric": self.metric,
            "metric_before": self.metric_before,
            "metric_after": self.metric_after,
            "fitness_before": self.fitness_before,
            "fitness_after": self.fitness_after,
            "full_evaluations": self.full_evaluations,
            "isolated_evaluations": self.isolated_evaluations,
            "verification_evaluations": self.verification_evaluations,
            "untunable": self.untunable,
            "reverted": self.reverted,
            "changes": {str(node_id): params for node_id, params in sorted(self.changes.items())},
        }

    def write_json(self, path: str):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, default=float)


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def tunable_nodes(pipeline: Pipeline, registry) -> List[Node]:
    order = pipeline.topological_order()
    return [pipeline.node(node_id) for node_id in order if registry.get(pipeline.node(node_id).operation_id).is_tunable]


def check_tunable(pipeline: Pipeline, registry) -> List[Node]:
    nodes = tunable_nodes(pipeline, registry)
    if not nodes:
        raise UntunableError("no node in the pipeline has a hyperparameter space")
    return nodes


class PipelineTuner:
    def __init__(self, pipeline: Pipeline, data: Dataset, config: TuningConfig, registry=None):
        self.pipeline = pipeline
        self.config = config
        self.registry = registry or get_registry()
        self.task = data.task
        self.metric = config.metric or default_metric(data.task)
        self.fit_data, self.validation_data = split(data, 1.0 - config.validation_split, config.seed)
        self.report = TuningReport(config.strategy.value, config.iterations, self.metric.value)

    # scoring

    def _score(self, pipeline: Pipeline, registry=None) -> Tuple[float, Optional[float]]:
        try:
            fitted = fit(pipeline, self.fit_data, self.config.seed, registry or self.registry)
            value = score_fitted(fitted, self.fit_data, self.validation_data, self.metric)
        except TUNING_FAILURES as exc:
            logger.debug("tuning candidate failed: %s", exc)
            return WORST_FITNESS, None
        fitness = to_fitness_score(value)
        if fitness != fitness:
            return WORST_FITNESS, None
        return fitness, value.value

    def score_full(self, pipeline: Pipeline) -> float:
        self.report.full_evaluations += 1
        return self._score(pipeline)[0]

    def verify(self, pipeline: Pipeline) -> Tuple[float, Optional[float]]:
        self.report.verification_evaluations += 1
        return self._score(pipeline)

    def probe_pipeline(self, pipeline: Pipeline, node_id: int) -> Tuple[Pipeline, Any]:
        """The node's subtree, closed by a probe model when the node is not a model itself"""
        subtree = pipeline.subgraph(node_id)
        spec = self.registry.get(pipeline.node(node_id).operation_id)
        if spec.is_model:
            return subtree, self.registry
        registry = self.registry
        probe_id = "logistic_regression" if self.task == TaskType.CLASSIFICATION else "ridge"
        probes = [probe_id] if spec.emits == Stage.TABLE else ["lagged_transform", probe_id]
        for operation_id in probes:
            if operation_id not in registry:
                registry = registry.with_operation(get_registry().get(operation_id))
        nodes = list(subtree.nodes)
        parent = node_id
        next_id = subtree.next_id()
        for operation_id in probes:
            nodes.append(Node(next_id, operation_id, {}, (parent,)))
            parent = next_id
            next_id += 1
        return Pipeline(nodes, subtree.task), registry

    def score_isolated(self, pipeline: Pipeline, node_id: int) -> float:
        self.report.isolated_evaluations += 1
        probe, registry = self.probe_pipeline(pipeline, node_id)
        return self._score(probe, registry)[0]

    # search

    def search(self, space: Dict[str, Any], start: Dict[str, Any], start_score: float, score_fn: Callable, seed: int) -> Tuple[Dict[str, Any], float]:
        history: History = [(start, start_score)]
        best, best_score = start, start_score
        for _ in range(self.config.iterations):
            candidate = self.config.sampler(space, history, seed)
            score = score_fn(candidate)
            history.append((candidate, score))
            if score > best_score:
                best, best_score = candidate, score
        return best, best_score

    @staticmethod
    def with_params(pipeline: Pipeline, node_id: int, params: Dict[str, Any]) -> Pipeline:
        node = pipeline.node(node_id)
        return pipeline.with_node(node.evolve(hyperparams={name: _plain(value) for name, value in params.items()}))

    def current_params(self, node: Node) -> Dict[str, Any]:
        spec = self.registry.get(node.operation_id)
        return {name: value for name, value in spec.full_params(node.hyperparams).items() if name in spec.hyperparam_space}

    def tune_per_node(self, nodes: List[Node], isolated: bool) -> Pipeline:
        current = self.pipeline
        current_score = None if isolated else self.score_full(current)
        for position, node in enumerate(nodes):
            space = self.registry.get(node.operation_id).hyperparam_space
            node_id = node.id

            def score_fn(params, node_id=node_id):
                candidate = self.with_params(current, node_id, params)
                return self.score_isolated(candidate, node_id) if isolated else self.score_full(candidate)

            start = self.current_params(current.node(node_id))
            start_score = score_fn(start) if isolated else current_score
            best, best_score = self.search(space, start, start_score, score_fn, self.config.seed + position)
            current = self.with_params(current, node_id, best)
            current_score = best_score
        return current

    def tune_simultaneous(self, nodes: List[Node]) -> Pipeline:
        space = {}
        start = {}
        for node in nodes:
            node_space = self.registry.get(node.operation_id).hyperparam_space
            for name, domain in node_space.items():
                space[f"{node.id}.{name}"] = domain
            for name, value in self.current_params(node).items():
                start[f"{node.id}.{name}"] = value

        def assemble(assignment):
            pipeline = self.pipeline
            for node in nodes:
                params = {key.split(".", 1)[1]: value for key, value in assignment.items() if key.split(".", 1)[0] == str(node.id)}
                pipeline = self.with_params(pipeline, node.id, params)
            return pipeline

        best, _ = self.search(space, start, self.score_full(self.pipeline), lambda a: self.score_full(assemble(a)), self.config.seed)
        return assemble(best)

    def record_changes(self, tuned: Pipeline):
        for node in self.pipeline.nodes:
            before = self.current_params(node)
            after = self.current_params(tuned.node(node.id))
            changed = {name: [before.get(name), after[name]] for name in after if before.get(name) != after[name]}
            if changed:
                self.report.changes[node.id] = changed

    def run(self) -> Tuple[Pipeline, TuningReport]:
        report = self.report
        report.fitness_before, report.metric_before = self.verify(self.pipeline)
        try:
            nodes = check_tunable(self.pipeline, self.registry)
        except UntunableError as exc:
            logger.info("%s; returning the pipeline unchanged", exc)
            report.untunable = True
            report.fitness_after, report.metric_after = report.fitness_before, report.metric_before
            return self.pipeline, report

        strategy = self.config.strategy
        if strategy == TuningStrategy.SIMULTANEOUS:
            tuned = self.tune_simultaneous(nodes)
        else:
            tuned = self.tune_per_node(nodes, isolated=strategy == TuningStrategy.SERIAL_ISOLATED)

        fitness, value = self.verify(tuned)
        if fitness < report.fitness_before:
            logger.info("tuned pipeline scored %.6f < %.6f; keeping the input", fitness, report.fitness_before)
            tuned, fitness, value = self.pipeline, report.fitness_before, report.metric_before
            report.reverted = True
        report.fitness_after, report.metric_after = fitness, value
        self.record_changes(tuned)
        logger.info(
            "%s tuning: %s %s -> %s (%d full, %d isolated evaluations)",
            strategy.value, self.metric.value, report.metric_before, report.metric_after,
            report.full_evaluations, report.isolated_evaluations,
        )
        return tuned, report


def tune(pipeline: Pipeline, data: Dataset, config: Optional[TuningConfig] = None, registry=None) -> Tuple[Pipeline, TuningReport]:
    return PipelineTuner(pipeline, data, config or TuningConfig(), registry).run()
