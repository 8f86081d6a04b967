from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

from dataio import TaskType
from metrics import Metric, default_metric
from pipeline.node import StructureClass
from settings import DEFAULT_MAX_ARITY, DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES


class SelectionType(str, Enum):
    TOURNAMENT = "tournament"
    SPEA2_LIKE = "spea2_like"


class AdaptiveScheme(str, Enum):
    NONE = "none"
    RATE_ADAPTATION = "rate_adaptation"


COMPLEXITY_MEASURES = ("node_count", "depth")


@dataclass(frozen=True)
class Objective:
    """A quality metric or a complexity measure; both become higher-is-better fitness"""
    metric: Optional[Metric] = None
    complexity: Optional[str] = None

    def __post_init__(self):
        if (self.metric is None) == (self.complexity is None):
            raise ValueError("an objective is either a quality metric or a complexity measure")
        if self.complexity is not None and self.complexity not in COMPLEXITY_MEASURES:
            raise ValueError(f"unknown complexity measure {self.complexity!r}")

    @classmethod
    def quality(cls, metric) -> "Objective":
        return cls(metric=Metric.parse(metric))

    @classmethod
    def parse(cls, text: str) -> "Objective":
        name = text.strip().lstrip("-").lower()
        if name in COMPLEXITY_MEASURES:
            return cls(complexity=name)
        return cls.quality(text.strip())

    @property
    def is_quality(self) -> bool:
        return self.metric is not None

    @property
    def name(self) -> str:
        return self.metric.value if self.is_quality else f"-{self.complexity}"


@dataclass
class ComposerConfig:
    pop_size: int = 10
    offspring_size: Optional[int] = None
    max_generations: int = 200
    time_limit_seconds: float = 600.0
    crossover_rate: float = 0.8
    mutation_rate: float = 0.8
    selection_type: SelectionType = SelectionType.TOURNAMENT
    structure_class: StructureClass = StructureClass.COMPOSITE
    max_depth: int = DEFAULT_MAX_DEPTH
    max_nodes: int = DEFAULT_MAX_NODES
    max_arity: int = DEFAULT_MAX_ARITY
    objectives: List[Objective] = field(default_factory=list)
    seed: int = 0
    adaptive_scheme: AdaptiveScheme = AdaptiveScheme.NONE
    initial_pipelines: List[Any] = field(default_factory=list)
    tags_include: Sequence[str] = ()
    tags_exclude: Sequence[str] = ()
    jobs: int = 1
    use_cache: bool = True
    regularization: bool = True
    telemetry_path: Optional[str] = None

    def __post_init__(self):
        self.selection_type = SelectionType(self.selection_type)
        self.structure_class = StructureClass(self.structure_class)
        self.adaptive_scheme = AdaptiveScheme(self.adaptive_scheme)
        self.objectives = [Objective.parse(o) if isinstance(o, str) else o for o in self.objectives]
        if self.pop_size < 2:
            raise ValueError(f"pop_size must be at least 2, got {self.pop_size}")
        if self.offspring_size is None:
            self.offspring_size = self.pop_size
        if self.max_generations < 0:
            raise ValueError("max_generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.objectives and not any(o.is_quality for o in self.objectives):
            raise ValueError("at least one quality objective is required")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    def resolved_objectives(self, task) -> List[Objective]:
        """Objectives with the quality objective first; defaults to the task's metric"""
        objectives = list(self.objectives) or [Objective.quality(default_metric(TaskType.parse(task)))]
        return [o for o in objectives if o.is_quality] + [o for o in objectives if not o.is_quality]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pop_size": self.pop_size,
            "offspring_size": self.offspring_size,
            "max_generations": self.max_generations,
            "time_limit_seconds": self.time_limit_seconds,
            "crossover_rate": self.crossover_rate,
            "mutation_rate": self.mutation_rate,
            "selection_type": self.selection_type.value,
            "structure_class": self.structure_class.value,
            "max_depth": self.max_depth,
            "max_nodes": self.max_nodes,
            "max_arity": self.max_arity,
            "objectives": [o.name for o in self.objectives],
            "seed": self.seed,
            "adaptive_scheme": self.adaptive_scheme.value,
            "initial_pipelines": len(self.initial_pipelines),
            "tags_include": sorted(self.tags_include),
            "tags_exclude": sorted(self.tags_exclude),
            "jobs": self.jobs,
            "use_cache": self.use_cache,
            "regularization": self.regularization,
        }
