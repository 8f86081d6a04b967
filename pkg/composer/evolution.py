"""
The evolutionary composer loop. Each generation: adapt operator rates, regularize,
update the front, select parents, reproduce, evaluate (cache first), select survivors.
The run stops at the generation limit or the time limit, whichever comes first.
"""

import logging
import time
from functools import partial
from typing import Callable, List, Optional

import numpy as np

from composer.adaptive import RateController
from composer.cache import FitnessCache
from composer.config import ComposerConfig
from composer.evaluation import Evaluator
from composer.growth import PipelineGrower, init_population
from composer.individual import Individual, ParetoFront
from composer.operators import Reproducer
from composer.regularization import regularize
from composer.selection import select_parents, select_survivors
from composer.telemetry import TelemetryLog, population_stats
from dataio import Dataset
from errors import BudgetExhaustedBeforeFirstEvaluation
from operations.registry import get_registry
from pipeline.validation import validate

logger = logging.getLogger(__name__)


def make_validator(config: ComposerConfig, registry, task) -> Callable:
    return partial(
        validate,
        structure_class=config.structure_class,
        max_depth=config.max_depth,
        registry=registry,
        task=task,
        max_nodes=config.max_nodes,
        max_arity=config.max_arity,
    )


class EvolutionaryComposer:
    def __init__(self, config: ComposerConfig, train: Dataset, registry=None):
        if train.n_rows == 0:
            raise ValueError("training data is empty")
        self.config = config
        self.train = train
        self.task = train.task
        self.registry = registry or get_registry()
        self.objectives = config.resolved_objectives(self.task)
        self.rng = np.random.default_rng(config.seed)
        self.validate_fn = make_validator(config, self.registry, self.task)
        self.grower = PipelineGrower(self.registry, self.task, config, self.validate_fn)
        self.reproducer = Reproducer(self.grower, self.validate_fn, self.rng)
        self.cache = FitnessCache() if config.use_cache else None
        self.rates = RateController(config.crossover_rate, config.mutation_rate, config.adaptive_scheme)
        self.telemetry = TelemetryLog(config.telemetry_path)
        self.front = ParetoFront(objective_names=[o.name for o in self.objectives])
        self.started = 0.0
        self.evaluator: Optional[Evaluator] = None

    def _evaluate(self, individuals: List[Individual]) -> List[Individual]:
        self.evaluator.evaluate(individuals)
        for individual in individuals:
            if individual.evaluated:
                self.front.evaluated_signatures.append(individual.signature)
        return individuals

    def _fitness_of(self, pipeline):
        return self._evaluate([Individual(pipeline)])[0].fitness

    def _sync_counters(self):
        self.front.fit_count = self.evaluator.fit_count
        if self.cache is not None:
            self.front.cache_hits = self.cache.hits
            self.front.cache_misses = self.cache.misses

    def _record(self, generation: int, population: List[Individual]):
        self._sync_counters()
        stats = population_stats(
            generation,
            population,
            self.front.best_quality,
            self.cache.hit_rate if self.cache is not None else 0.0,
            time.monotonic() - self.started,
            self.rates.crossover_rate,
            self.rates.mutation_rate,
            self.evaluator.fit_count,
        )
        self.telemetry.append(stats)
        self.front.history.append(self.telemetry.to_records()[-1])
        self.front.generations_completed = generation
        logger.info(
            "generation %d: best %.6f median %.6f diversity %d cache hit rate %.2f",
            generation, stats.best, stats.median, stats.diversity, stats.cache_hit_rate,
        )

    def run(self) -> ParetoFront:
        config = self.config
        self.started = time.monotonic()
        self.evaluator = Evaluator.from_train(
            self.train,
            self.objectives,
            self.registry,
            config.seed,
            cache=self.cache,
            jobs=config.jobs,
            deadline=self.started + config.time_limit_seconds,
        )

        population = init_population(self.registry, config, self.task, self.rng, self.validate_fn, self.grower)
        self._evaluate(population)
        self.front.update(population)
        if not all(individual.evaluated for individual in population):
            self._sync_counters()
            raise BudgetExhaustedBeforeFirstEvaluation(self.front)
        self._record(0, population)

        for generation in range(1, config.max_generations + 1):
            if self.evaluator.expired():
                logger.info("time limit reached after %d generations", generation - 1)
                break
            crossover_rate, mutation_rate = self.rates.update()
            if config.regularization:
                population = regularize(population, self._fitness_of, self.validate_fn, self.evaluator.signature,
                                        self.evaluator.fit_fold_quality)
            self.front.update(population)

            parents = select_parents(population, config.offspring_size, self.rng, config.selection_type)
            offspring = self.reproducer.reproduce(parents, config.offspring_size, crossover_rate, mutation_rate)
            self._evaluate(offspring)
            self.rates.record([child for child in offspring if child.evaluated])

            population = select_survivors(population + offspring, config.pop_size, self.rng, config.selection_type)
            self.front.update(offspring)
            self._record(generation, population)

        self._sync_counters()
        return self.front


def compose(config: ComposerConfig, train: Dataset, registry=None) -> ParetoFront:
    return EvolutionaryComposer(config, train, registry).run()
