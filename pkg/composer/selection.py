"""
Parent and survivor selection. Single-objective runs use size-3 tournaments with one
elite; multi-objective runs rank by non-dominated fronts and crowding distance, or by
a strength-plus-density score for the spea2-like variant.
"""

from typing import Dict, List, Sequence

import numpy as np

from composer.config import SelectionType
from composer.individual import Individual, dominates
from settings import TOURNAMENT_SIZE


def non_dominated_sort(fitnesses: Sequence[Sequence[float]]) -> List[List[int]]:
    """
    Peel fronts off by domination counts. Returns lists of indices, best front first;
    every index appears in exactly one front.
    """
    num_items = len(fitnesses)
    domination_sets: List[List[int]] = [[] for _ in range(num_items)]
    dominated_counts = [0] * num_items
    top_front = []
    for i in range(num_items):
        for j in range(num_items):
            if dominates(fitnesses[i], fitnesses[j]):
                domination_sets[i].append(j)
            elif dominates(fitnesses[j], fitnesses[i]):
                dominated_counts[i] += 1
        if dominated_counts[i] == 0:
            top_front.append(i)

    fronts = [top_front] if top_front else []
    ranked = len(top_front)
    while ranked < num_items:
        new_front = []
        for i in fronts[-1]:
            for j in domination_sets[i]:
                dominated_counts[j] -= 1
                if dominated_counts[j] == 0:
                    new_front.append(j)
        ranked += len(new_front)
        fronts.append(sorted(new_front))
    return fronts


def crowding_distance(fitnesses: Sequence[Sequence[float]], front: Sequence[int]) -> Dict[int, float]:
    distance = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: float("inf") for i in front}
    values = np.asarray([fitnesses[i] for i in front], dtype=float)
    for column in range(values.shape[1]):
        order = np.argsort(values[:, column], kind="stable")
        low, high = values[order[0], column], values[order[-1], column]
        distance[front[order[0]]] = distance[front[order[-1]]] = float("inf")
        if high == low:
            continue
        for position in range(1, len(front) - 1):
            gap = values[order[position + 1], column] - values[order[position - 1], column]
            distance[front[order[position]]] += gap / (high - low)
    return distance


def rank_and_crowding(fitnesses: Sequence[Sequence[float]]) -> List[tuple]:
    """Sort key per index: lower front first, then larger crowding distance"""
    keys = [None] * len(fitnesses)
    for rank, front in enumerate(non_dominated_sort(fitnesses)):
        crowding = crowding_distance(fitnesses, front)
        for i in front:
            keys[i] = (rank, -crowding[i])
    return keys


def spea2_scores(fitnesses: Sequence[Sequence[float]]) -> np.ndarray:
    """Raw fitness (sum of dominator strengths) plus a k-th neighbour density term; lower is better"""
    n = len(fitnesses)
    strength = np.zeros(n)
    for i in range(n):
        strength[i] = sum(dominates(fitnesses[i], fitnesses[j]) for j in range(n))
    raw = np.zeros(n)
    for i in range(n):
        raw[i] = sum(strength[j] for j in range(n) if dominates(fitnesses[j], fitnesses[i]))
    values = np.asarray(fitnesses, dtype=float)
    distances = np.sqrt(((values[:, None, :] - values[None, :, :]) ** 2).sum(axis=2))
    k = min(int(np.sqrt(n)), n - 1)
    kth = np.sort(distances, axis=1)[:, k] if n > 1 else np.zeros(n)
    return raw + 1.0 / (kth + 2.0)


def _order_keys(individuals: Sequence[Individual], selection_type: SelectionType) -> List:
    """Lower key means better individual"""
    fitnesses = [ind.fitness for ind in individuals]
    if len(fitnesses[0]) == 1:
        return [(-f[0],) for f in fitnesses]
    if selection_type == SelectionType.SPEA2_LIKE:
        return [(float(score),) for score in spea2_scores(fitnesses)]
    return rank_and_crowding(fitnesses)


def tournament(keys: Sequence, rng: np.random.Generator, size: int = TOURNAMENT_SIZE) -> int:
    entrants = rng.choice(len(keys), size=min(size, len(keys)), replace=False)
    return int(min(entrants, key=lambda i: (keys[i], i)))


def select_parents(population: List[Individual], count: int, rng: np.random.Generator, selection_type=SelectionType.TOURNAMENT) -> List[Individual]:
    evaluated = [ind for ind in population if ind.evaluated]
    keys = _order_keys(evaluated, SelectionType(selection_type))
    return [evaluated[tournament(keys, rng)] for _ in range(count)]


def select_survivors(candidates: List[Individual], size: int, rng: np.random.Generator, selection_type=SelectionType.TOURNAMENT) -> List[Individual]:
    """
    Next population from parents plus offspring. Single objective keeps the best one
    and fills the rest with size-3 tournaments drawn without replacement.
    """
    pool = [ind for ind in candidates if ind.evaluated]
    if len(pool) <= size:
        return pool
    keys = _order_keys(pool, SelectionType(selection_type))
    elite = max(range(len(pool)), key=lambda i: (pool[i].fitness, -i))
    if len(pool[0].fitness) > 1:
        order = [elite] + [i for i in sorted(range(len(pool)), key=lambda i: (keys[i], i)) if i != elite]
        return [pool[i] for i in order[:size]]

    survivors = [pool[elite]]
    remaining = [i for i in range(len(pool)) if i != elite]
    while len(survivors) < size:
        winner = tournament([keys[i] for i in remaining], rng)
        survivors.append(pool[remaining.pop(winner)])
    return survivors
