"""
Operator-rate adaptation driven by offspring success: a child succeeds when its
primary quality beats the better of its parents.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from composer.config import AdaptiveScheme
from composer.individual import Individual
from composer.operators import CROSSOVERS, MUTATIONS
from settings import RATE_BOUNDS, RATE_STEP, RATE_TARGET_SUCCESS, RATE_WINDOW

logger = logging.getLogger(__name__)


def clamp_rate(rate: float) -> float:
    low, high = RATE_BOUNDS
    return min(high, max(low, rate))


def offspring_record(child: Individual) -> Dict:
    improved = child.evaluated and child.parent_quality is not None and child.quality > child.parent_quality
    return {
        "crossover": any(op in CROSSOVERS for op in child.operators),
        "mutation": any(op in MUTATIONS for op in child.operators),
        "improved": bool(improved),
    }


def success_ratio(history: Sequence[Dict], key: str, window: int = RATE_WINDOW):
    """Fraction of the last `window` offspring produced with `key` that improved; None if none were"""
    used = [record["improved"] for record in list(history)[-window:] if record.get(key)]
    if not used:
        return None
    return sum(used) / len(used)


def _adjusted(rate: float, ratio) -> float:
    if ratio is None:
        return rate
    factor = 1.0 + RATE_STEP if ratio > RATE_TARGET_SUCCESS else 1.0 - RATE_STEP
    return clamp_rate(rate * factor)


def update_adaptive_rates(
    history: Sequence[Dict],
    crossover_rate: float,
    mutation_rate: float,
    scheme: AdaptiveScheme = AdaptiveScheme.RATE_ADAPTATION,
) -> Tuple[float, float]:
    if AdaptiveScheme(scheme) == AdaptiveScheme.NONE or not history:
        return crossover_rate, mutation_rate
    return (
        _adjusted(crossover_rate, success_ratio(history, "crossover")),
        _adjusted(mutation_rate, success_ratio(history, "mutation")),
    )


@dataclass
class RateController:
    crossover_rate: float
    mutation_rate: float
    scheme: AdaptiveScheme = AdaptiveScheme.NONE
    history: List[Dict] = field(default_factory=list)

    def record(self, offspring: Sequence[Individual]):
        self.history.extend(offspring_record(child) for child in offspring)
        del self.history[:-RATE_WINDOW]

    def update(self) -> Tuple[float, float]:
        rates = update_adaptive_rates(self.history, self.crossover_rate, self.mutation_rate, self.scheme)
        if rates != (self.crossover_rate, self.mutation_rate):
            logger.debug("operator rates %.3f/%.3f -> %.3f/%.3f", self.crossover_rate, self.mutation_rate, *rates)
        self.crossover_rate, self.mutation_rate = rates
        return rates
