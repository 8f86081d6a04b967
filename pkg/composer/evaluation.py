"""
Fitness evaluation: fit on an internal fit fold, score on the score fold, consult the
cache by canonical signature first. Failed fits get the worst quality instead of
stopping the run.
"""

import hashlib
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from composer.cache import FitnessCache
from composer.config import Objective
from composer.individual import Individual
from dataio import Dataset, split
from errors import PipeForgeError
from metrics import to_fitness_score
from operations.registry import get_registry
from pipeline.executor import fit, score_fitted
from pipeline.graph import Pipeline, canonical_signature, compute_depth
from settings import FITNESS_SPLIT_RATIO

logger = logging.getLogger(__name__)

WORST_QUALITY = 0.0
SCORING_FAILURES = (PipeForgeError, ValueError, FloatingPointError, ArithmeticError)


def evaluation_seed(run_seed: int, signature: str) -> int:
    """Seed for one individual, independent of evaluation order"""
    digest = hashlib.sha256(f"{int(run_seed)}:{signature}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def node_count(pipeline: Pipeline, registry) -> int:
    """Atomized operations count as their full inner node count"""
    total = 0
    for node in pipeline.nodes:
        total += registry.get(node.operation_id).node_count if node.operation_id in registry else 1
    return total


class Evaluator:
    def __init__(
        self,
        objectives: Sequence[Objective],
        fit_data: Dataset,
        score_data: Dataset,
        registry,
        seed: int = 0,
        cache: Optional[FitnessCache] = None,
        jobs: int = 1,
        deadline: Optional[float] = None,
    ):
        self.objectives = list(objectives)
        self.fit_data = fit_data
        self.score_data = score_data
        self.registry = registry
        self.seed = seed
        self.cache = cache
        self.jobs = jobs
        self.deadline = deadline
        self.fit_count = 0
        self._count_lock = threading.Lock()
        self._fit_fold: Dict[str, Optional[float]] = {}

    @classmethod
    def from_train(cls, train: Dataset, objectives, registry, seed=0, **kwargs) -> "Evaluator":
        fit_data, score_data = split(train, FITNESS_SPLIT_RATIO, seed)
        return cls(objectives, fit_data, score_data, registry, seed, **kwargs)

    def signature(self, pipeline: Pipeline) -> str:
        return canonical_signature(pipeline, self.registry)

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def compute_fitness(self, pipeline: Pipeline, signature: str) -> Tuple[float, ...]:
        """Fit and score one pipeline; never raises for pipeline-level failures"""
        with self._count_lock:
            self.fit_count += 1
        qualities = {}
        try:
            fitted = fit(pipeline, self.fit_data, evaluation_seed(self.seed, signature), self.registry)
            for objective in self.objectives:
                if objective.is_quality:
                    value = score_fitted(fitted, self.fit_data, self.score_data, objective.metric)
                    qualities[objective.metric] = to_fitness_score(value)
        except SCORING_FAILURES as exc:
            logger.debug("pipeline %s scored worst: %s", signature[:12], exc)
            qualities = {}

        fitness = []
        for objective in self.objectives:
            if objective.is_quality:
                score = qualities.get(objective.metric, WORST_QUALITY)
                fitness.append(score if score == score else WORST_QUALITY)
            elif objective.complexity == "node_count":
                fitness.append(-float(node_count(pipeline, self.registry)))
            else:
                fitness.append(-float(compute_depth(pipeline)))
        return tuple(fitness)

    def fit_fold_quality(self, pipeline: Pipeline) -> Optional[float]:
        """
        Primary quality measured inside the fit fold: in-sample for tables, and for series
        a chronological hold-out at the end of the fit fold. Memoized by signature.
        """
        signature = self.signature(pipeline)
        with self._count_lock:
            if signature in self._fit_fold:
                return self._fit_fold[signature]
            self.fit_count += 1
        metric = next(objective.metric for objective in self.objectives if objective.is_quality)
        try:
            if self.fit_data.is_time_series:
                head, tail = split(self.fit_data, FITNESS_SPLIT_RATIO, self.seed)
            else:
                head = tail = self.fit_data
            fitted = fit(pipeline, head, evaluation_seed(self.seed, signature), self.registry)
            quality = to_fitness_score(score_fitted(fitted, head, tail, metric))
        except SCORING_FAILURES as exc:
            logger.debug("pipeline %s has no fit-fold quality: %s", signature[:12], exc)
            quality = None
        if quality is not None and quality != quality:
            quality = None
        with self._count_lock:
            self._fit_fold[signature] = quality
        return quality

    def fitness_of(self, pipeline: Pipeline) -> Tuple[float, ...]:
        individual = Individual(pipeline)
        self.evaluate([individual])
        return individual.fitness

    def _run(self, tasks: List[Tuple[Pipeline, str]]) -> List[Optional[Tuple[float, ...]]]:
        """Fitness per task; tasks not started before the deadline come back as None"""
        if self.jobs > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                futures = []
                for pipeline, signature in tasks:
                    if self.expired():
                        futures.append(None)
                        continue
                    futures.append(pool.submit(self.compute_fitness, pipeline, signature))
                return [None if future is None else future.result() for future in futures]
        results = []
        for pipeline, signature in tasks:
            results.append(None if self.expired() else self.compute_fitness(pipeline, signature))
        return results

    def evaluate(self, individuals: List[Individual]) -> List[Individual]:
        """
        Cache lookups happen in list order, so a signature repeated within one batch is a
        miss the first time and a hit afterwards, whatever the worker count.
        """
        pending = [individual for individual in individuals if not individual.evaluated]
        for individual in pending:
            if not individual.signature:
                individual.signature = self.signature(individual.pipeline)

        if self.cache is None:
            results = self._run([(individual.pipeline, individual.signature) for individual in pending])
            for individual, fitness in zip(pending, results):
                individual.fitness = fitness
            return individuals

        unique = {}
        owners = []
        for individual in pending:
            signature = individual.signature
            if signature in unique:
                self.cache.record_hit()
                owners.append(individual)
                continue
            cached = self.cache.lookup(signature)
            if cached is not None:
                individual.fitness = cached
                continue
            unique[signature] = individual.pipeline
            owners.append(individual)

        results = dict(zip(unique, self._run([(pipeline, signature) for signature, pipeline in unique.items()])))
        for signature, fitness in results.items():
            if fitness is not None:
                self.cache.store(signature, fitness)
        for individual in owners:
            individual.fitness = results.get(individual.signature)
        return individuals


def evaluate_population(
    pop: List[Individual],
    objectives,
    data: Dataset,
    cache: Optional[FitnessCache],
    registry=None,
    seed: int = 0,
    jobs: int = 1,
) -> List[Individual]:
    """Split `data` into fit/score folds and evaluate every unevaluated individual"""
    evaluator = Evaluator.from_train(data, objectives, registry or get_registry(), seed, cache=cache, jobs=jobs)
    evaluator.evaluate(pop)
    return pop
