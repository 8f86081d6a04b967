from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from pipeline.graph import Pipeline

Fitness = Tuple[float, ...]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a dominates b: no worse on every objective and strictly better on one"""
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


@dataclass
class Individual:
    pipeline: Pipeline
    fitness: Optional[Fitness] = None
    signature: str = ""
    origin: str = "init"
    # best primary-quality fitness among the parents this individual was bred from
    parent_quality: Optional[float] = None
    operators: Tuple[str, ...] = ()

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    @property
    def quality(self) -> float:
        return self.fitness[0]

    def to_dict(self) -> Dict:
        return {
            "signature": self.signature,
            "fitness": list(self.fitness) if self.fitness is not None else None,
            "origin": self.origin,
            "nodes": len(self.pipeline),
        }


@dataclass
class ParetoFront:
    """
    Archive of mutually non-dominated individuals over everything evaluated so far.
    Equal fitness vectors keep only the first individual seen, so a single-objective
    front always holds exactly the incumbent best.
    """
    objective_names: List[str] = field(default_factory=list)
    members: List[Individual] = field(default_factory=list)
    history: List[Dict] = field(default_factory=list)
    evaluated_signatures: List[str] = field(default_factory=list)
    fit_count: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    generations_completed: int = 0

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def update(self, candidates: Sequence[Individual]) -> bool:
        changed = False
        for candidate in candidates:
            if not candidate.evaluated:
                continue
            if any(m.fitness == candidate.fitness or dominates(m.fitness, candidate.fitness) for m in self.members):
                continue
            self.members = [m for m in self.members if not dominates(candidate.fitness, m.fitness)]
            self.members.append(candidate)
            changed = True
        return changed

    @property
    def best(self) -> Optional[Individual]:
        """Highest primary quality; ties go to the better remaining objectives"""
        if not self.members:
            return None
        return max(self.members, key=lambda m: m.fitness)

    @property
    def best_quality(self) -> float:
        best = self.best
        return float("-inf") if best is None else best.quality

    def sorted_members(self) -> List[Individual]:
        return sorted(self.members, key=lambda m: m.fitness, reverse=True)

    def is_mutually_non_dominated(self) -> bool:
        return not any(dominates(a.fitness, b.fitness) for a in self.members for b in self.members if a is not b)

    def to_dict(self) -> Dict:
        return {
            "objectives": list(self.objective_names),
            "members": [m.to_dict() for m in self.sorted_members()],
            "fit_count": self.fit_count,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "generations_completed": self.generations_completed,
        }
