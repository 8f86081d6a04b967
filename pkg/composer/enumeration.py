"""
Exhaustive enumeration of small pipelines with default hyperparameters. Used as a
brute-force oracle for the composer on tiny search spaces.
"""

import itertools
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

from composer.config import Objective
from composer.evaluation import Evaluator
from dataio import Dataset, TaskType
from metrics import default_metric
from pipeline.graph import Pipeline, canonical_signature
from pipeline.node import Node, StructureClass
from pipeline.validation import validate
from settings import DEFAULT_MAX_DEPTH

logger = logging.getLogger(__name__)


def _parent_choices(position: int, max_arity: Optional[int]) -> List[Tuple[int, ...]]:
    limit = position if max_arity is None else min(position, max_arity)
    choices = []
    for size in range(limit + 1):
        choices.extend(itertools.combinations(range(position), size))
    return choices


def _raw_pipelines(operations: Sequence[str], size: int, task, max_arity) -> Iterator[Pipeline]:
    # node i may only read from nodes before it, so every candidate is acyclic
    wirings = itertools.product(*[_parent_choices(i, max_arity) for i in range(size)])
    for wiring in wirings:
        for assignment in itertools.product(operations, repeat=size):
            yield Pipeline([Node(i, op, {}, wiring[i]) for i, op in enumerate(assignment)], task)


def enumerate_pipelines(
    operations: Sequence[str],
    max_nodes: int,
    task,
    registry,
    structure_class=StructureClass.COMPOSITE,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_arity: Optional[int] = None,
) -> List[Pipeline]:
    """Every valid pipeline of at most `max_nodes` nodes, one per canonical signature"""
    task = TaskType.parse(task)
    seen = set()
    result = []
    for size in range(1, max_nodes + 1):
        for pipeline in _raw_pipelines(list(operations), size, task, max_arity):
            if not validate(pipeline, structure_class, max_depth, registry, task, max_nodes, max_arity):
                continue
            signature = canonical_signature(pipeline, registry)
            if signature in seen:
                continue
            seen.add(signature)
            result.append(pipeline.relabeled())
    logger.debug("enumerated %d distinct pipelines up to %d nodes", len(result), max_nodes)
    return result


def exhaustive_optimum(
    operations: Sequence[str],
    max_nodes: int,
    train: Dataset,
    registry,
    metric=None,
    seed: int = 0,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Tuple[Optional[Pipeline], float]:
    """Best pipeline and its fitness under the composer's own fit/score split"""
    objectives = [Objective.quality(metric if metric is not None else default_metric(train.task))]
    evaluator = Evaluator.from_train(train, objectives, registry, seed)
    best, best_fitness = None, float("-inf")
    for pipeline in enumerate_pipelines(operations, max_nodes, train.task, registry, max_depth=max_depth):
        fitness = evaluator.fitness_of(pipeline)[0]
        if fitness > best_fitness:
            best, best_fitness = pipeline, fitness
    return best, best_fitness
