import logging
from typing import Callable, List, Optional

from composer.individual import Individual
from settings import QUALITY_TOLERANCE

logger = logging.getLogger(__name__)


def simplify(individual: Individual, fitness_fn: Callable, validate_fn: Callable, signature_fn: Callable,
             fit_fold_fn: Optional[Callable] = None) -> Individual:
    """
    Greedy node removal: drop any node whose deletion keeps the pipeline valid and does
    not lower fit-fold quality, sweeping until nothing more can go. The result replaces
    the individual only when its primary fitness is not worse.
    """
    if fit_fold_fn is None:
        def fit_fold_fn(pipeline):
            fitness = fitness_fn(pipeline)
            return None if fitness is None else fitness[0]

    pipeline = individual.pipeline
    fold_quality = fit_fold_fn(pipeline)
    if fold_quality is None:
        return individual
    changed = True
    while changed and len(pipeline) > 1:
        changed = False
        for node_id in pipeline.topological_order():
            candidate = pipeline.without_node(node_id)
            if not validate_fn(candidate):
                continue
            candidate_quality = fit_fold_fn(candidate)
            if candidate_quality is None or candidate_quality < fold_quality - QUALITY_TOLERANCE:
                continue
            logger.debug("regularization removed node %d (%s)", node_id, pipeline.node(node_id).operation_id)
            pipeline, fold_quality = candidate, candidate_quality
            changed = True
            break

    if pipeline is individual.pipeline:
        return individual
    fitness = fitness_fn(pipeline)
    if fitness is None or fitness[0] < individual.quality - QUALITY_TOLERANCE:
        logger.debug("regularized variant scored worse, keeping the original")
        return individual
    return Individual(
        pipeline,
        fitness=fitness,
        signature=signature_fn(pipeline),
        origin="regularized",
        parent_quality=individual.parent_quality,
        operators=individual.operators,
    )


def regularize(population: List[Individual], fitness_fn: Callable, validate_fn: Callable, signature_fn: Callable,
               fit_fold_fn: Optional[Callable] = None) -> List[Individual]:
    """
    Replace each evaluated individual by its simplified variant when that is not worse.
    Without `fit_fold_fn` removals are judged on the primary fitness itself.
    """
    result = []
    for individual in population:
        if not individual.evaluated or len(individual.pipeline) < 2:
            result.append(individual)
            continue
        result.append(simplify(individual, fitness_fn, validate_fn, signature_fn, fit_fold_fn))
    return result
