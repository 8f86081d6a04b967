"""
Structural sensitivity analysis: how much each node contributes to a pipeline's score,
measured by deleting it or swapping its operation and refitting.

Importance of a node over N refits:

    S = mean_i (1 - F(modified, seed_i) / F(original, seed_i))

F is the positive higher-is-better fitness score. A positive S means the node helps; a
negative S means the modification improves the pipeline.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dataio import Dataset, split
from errors import NodeNotModifiableError, PipeForgeError
from metrics import Metric, default_metric, to_fitness_score
from operations.registry import get_registry
from pipeline.dot import pipeline_to_dot
from pipeline.executor import fit, score_fitted
from pipeline.graph import Pipeline, compute_depth
from pipeline.node import StructureClass
from pipeline.validation import validate
from settings import DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES

logger = logging.getLogger(__name__)

APPROACHES = ("delete", "replace")
WORST_FITNESS = 0.0
SCORING_FAILURES = (PipeForgeError, ValueError, FloatingPointError, ArithmeticError)


def importance_index(base_scores: Sequence[float], modified_scores: Sequence[float]) -> float:
    base = np.asarray(base_scores, dtype=float)
    modified = np.asarray(modified_scores, dtype=float)
    if base.shape != modified.shape or base.size == 0:
        raise ValueError("importance needs one modified score per base score")
    if np.any(base <= 0):
        raise ValueError("base scores must be positive")
    return float(np.mean(1.0 - modified / base))


@dataclass
class SAConfig:
    approaches: Tuple[str, ...] = APPROACHES
    iterations: int = 1
    metric: Optional[Metric] = None
    seed: int = 0
    validation_split: float = 0.25

    def __post_init__(self):
        self.approaches = tuple(self.approaches)
        if not self.approaches:
            raise ValueError("at least one approach is required")
        unknown = [a for a in self.approaches if a not in APPROACHES]
        if unknown:
            raise ValueError(f"unknown approaches {unknown}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.metric is not None:
            self.metric = Metric.parse(self.metric)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "approaches": list(self.approaches),
            "iterations": self.iterations,
            "metric": self.metric.value if self.metric else None,
            "seed": self.seed,
            "validation_split": self.validation_split,
        }


@dataclass
class NodeSensitivity:
    node_id: int
    operation_id: str
    delete_importance: Optional[float] = None
    replace_importance: Optional[float] = None
    best_replacement: Optional[str] = None
    not_modifiable: List[str] = field(default_factory=list)

    @property
    def delete_improves(self) -> bool:
        return self.delete_importance is not None and self.delete_importance < 0

    @property
    def replace_improves(self) -> bool:
        return self.replace_importance is not None and self.replace_importance < 0

    @property
    def importance(self) -> Optional[float]:
        return self.delete_importance if self.delete_importance is not None else self.replace_importance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "operation_id": self.operation_id,
            "importance": self.importance,
            "delete_importance": self.delete_importance,
            "replace_importance": self.replace_importance,
            "best_replacement": self.best_replacement,
            "delete_improves": self.delete_improves,
            "not_modifiable": list(self.not_modifiable),
        }


@dataclass
class SAReport:
    pipeline: Pipeline
    per_node: Dict[int, NodeSensitivity] = field(default_factory=dict)
    n_total: int = 0
    n_del: int = 0
    n_repl: int = 0
    metric: str = ""
    base_score: float = 0.0

    @property
    def sustainability_index(self) -> float:
        """Share of the original structure that survives: 1 - N_del / N_total"""
        return 1.0 - self.n_del / self.n_total if self.n_total else 1.0

    def importances(self) -> Dict[int, float]:
        return {node_id: entry.importance for node_id, entry in self.per_node.items() if entry.importance is not None}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric,
            "base_score": self.base_score,
            "sustainability_index": self.sustainability_index,
            "n_total": self.n_total,
            "n_del": self.n_del,
            "n_repl": self.n_repl,
            "per_node": {str(node_id): entry.to_dict() for node_id, entry in sorted(self.per_node.items())},
        }

    def write_json(self, path: str):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2)

    def to_dot(self, name: str = "sensitivity") -> str:
        return pipeline_to_dot(self.pipeline, self.importances(), name)


class SensitivityAnalyzer:
    def __init__(self, pipeline: Pipeline, data: Dataset, config: SAConfig, registry=None):
        self.pipeline = pipeline
        self.config = config
        self.registry = registry or get_registry()
        self.task = data.task
        self.metric = config.metric or default_metric(data.task)
        self.fit_data, self.score_data = split(data, 1.0 - config.validation_split, config.seed)
        self._base: Optional[List[float]] = None

    def seeds(self) -> List[int]:
        return [self.config.seed + i for i in range(self.config.iterations)]

    def score(self, pipeline: Pipeline, seed: int) -> float:
        try:
            fitted = fit(pipeline, self.fit_data, seed, self.registry)
            fitness = to_fitness_score(score_fitted(fitted, self.fit_data, self.score_data, self.metric))
        except SCORING_FAILURES as exc:
            logger.debug("modified pipeline scored worst: %s", exc)
            return WORST_FITNESS
        return fitness if fitness == fitness else WORST_FITNESS

    def scores(self, pipeline: Pipeline) -> List[float]:
        return [self.score(pipeline, seed) for seed in self.seeds()]

    @property
    def base_scores(self) -> List[float]:
        if self._base is None:
            self._base = self.scores(self.pipeline)
        return self._base

    def is_valid(self, pipeline: Pipeline) -> bool:
        return bool(
            validate(
                pipeline,
                StructureClass.COMPOSITE,
                max(DEFAULT_MAX_DEPTH, compute_depth(self.pipeline)),
                self.registry,
                self.task,
                max(DEFAULT_MAX_NODES, len(self.pipeline)),
            )
        )

    def _check_modifiable(self, node_id: int):
        if node_id not in self.pipeline:
            raise NodeNotModifiableError(node_id, "no such node")
        if node_id == self.pipeline.final_node_id:
            raise NodeNotModifiableError(node_id, "the final node cannot be modified")

    def deleted(self, node_id: int) -> Pipeline:
        self._check_modifiable(node_id)
        candidate = self.pipeline.without_node(node_id)
        if not self.is_valid(candidate):
            raise NodeNotModifiableError(node_id, "deletion leaves no valid rewiring")
        return candidate

    def replacements(self, node_id: int) -> List[Pipeline]:
        """Same-kind, stage-compatible operations with registry defaults"""
        self._check_modifiable(node_id)
        node = self.pipeline.node(node_id)
        spec = self.registry.get(node.operation_id)
        candidates = []
        for other in self.registry.filter(task=self.task):
            if other.operation_id == spec.operation_id or other.is_model != spec.is_model:
                continue
            if other.accepts != spec.accepts or other.emits != spec.emits:
                continue
            candidate = self.pipeline.with_node(node.evolve(operation_id=other.operation_id, hyperparams={}))
            if self.is_valid(candidate):
                candidates.append(candidate)
        if not candidates:
            raise NodeNotModifiableError(node_id, "no valid replacement operation")
        return candidates

    def delete_importance(self, node_id: int) -> float:
        return importance_index(self.base_scores, self.scores(self.deleted(node_id)))

    def replace_importance(self, node_id: int) -> Tuple[float, str]:
        """Importance against the best substitute, and that substitute's operation id"""
        best = None
        for candidate in self.replacements(node_id):
            value = importance_index(self.base_scores, self.scores(candidate))
            if best is None or value < best[0]:
                best = (value, candidate.node(node_id).operation_id)
        return best

    def node_importance(self, node_id: int, approach: str = "delete") -> float:
        if approach == "delete":
            return self.delete_importance(node_id)
        return self.replace_importance(node_id)[0]

    def analyze(self) -> SAReport:
        report = SAReport(self.pipeline, n_total=len(self.pipeline), metric=self.metric.value)
        report.base_score = float(np.mean(self.base_scores))
        if min(self.base_scores) <= 0:
            logger.warning("original pipeline scored %s; importances are undefined", self.base_scores)
            return report
        sink = self.pipeline.final_node_id
        for node_id in self.pipeline.topological_order():
            if node_id == sink:
                continue
            entry = NodeSensitivity(node_id, self.pipeline.node(node_id).operation_id)
            if "delete" in self.config.approaches:
                try:
                    entry.delete_importance = self.delete_importance(node_id)
                except NodeNotModifiableError as exc:
                    entry.not_modifiable.append(f"delete: {exc.reason}")
            if "replace" in self.config.approaches:
                try:
                    entry.replace_importance, entry.best_replacement = self.replace_importance(node_id)
                except NodeNotModifiableError as exc:
                    entry.not_modifiable.append(f"replace: {exc.reason}")
            report.per_node[node_id] = entry
            logger.debug("node %d: %s", node_id, entry.to_dict())

        report.n_del = sum(entry.delete_improves for entry in report.per_node.values())
        report.n_repl = sum(
            entry.replace_improves and not entry.delete_improves for entry in report.per_node.values()
        )
        return report


def node_importance(pipeline: Pipeline, node_id: int, data: Dataset, config: Optional[SAConfig] = None, registry=None, approach: str = "delete") -> float:
    return SensitivityAnalyzer(pipeline, data, config or SAConfig(), registry).node_importance(node_id, approach)


def analyze(pipeline: Pipeline, data: Dataset, config: Optional[SAConfig] = None, registry=None) -> SAReport:
    return SensitivityAnalyzer(pipeline, data, config or SAConfig(), registry).analyze()


def improve(pipeline: Pipeline, report: SAReport, registry=None) -> Pipeline:
    """Apply the single most harmful-node modification; deletion wins ties"""
    registry = registry or get_registry()
    moves = []
    for node_id, entry in report.per_node.items():
        if entry.delete_improves:
            moves.append((entry.delete_importance, 0, node_id, None))
        if entry.replace_improves:
            moves.append((entry.replace_importance, 1, node_id, entry.best_replacement))
    if not moves:
        return pipeline
    _, _, node_id, replacement = min(moves, key=lambda move: (move[0], move[1], move[2]))
    if replacement is None:
        candidate = pipeline.without_node(node_id)
    else:
        candidate = pipeline.with_node(pipeline.node(node_id).evolve(operation_id=replacement, hyperparams={}))
    result = validate(candidate, StructureClass.COMPOSITE, max(DEFAULT_MAX_DEPTH, compute_depth(pipeline)), registry, pipeline.task,
                      max(DEFAULT_MAX_NODES, len(pipeline)))
    if not result:
        logger.warning("improvement on node %d is invalid (%s); keeping the pipeline", node_id, result.rule)
        return pipeline
    logger.info("improved pipeline by %s node %d", "deleting" if replacement is None else f"replacing with {replacement}", node_id)
    return candidate
