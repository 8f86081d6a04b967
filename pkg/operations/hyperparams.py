"""
Hyperparameter domains: integer ranges, continuous ranges on a linear or log scale,
and categorical sets. Domains know how to check, sample and perturb their values.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class IntRange:
    low: int
    high: int

    kind = "int"

    def contains(self, value: Any) -> bool:
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            else:
                return False
        return self.low <= int(value) <= self.high

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))

    def perturb(self, value: int, rng: np.random.Generator) -> int:
        span = max(1, (self.high - self.low) // 5)
        return int(np.clip(int(value) + int(rng.integers(-span, span + 1)), self.low, self.high))

    def coerce(self, value: Any) -> int:
        return int(value)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "low": self.low, "high": self.high}


@dataclass(frozen=True)
class FloatRange:
    low: float
    high: float
    scale: str = "linear"
    # values below the sampling range that are still accepted (ridge admits alpha=0)
    admissible_low: Optional[float] = None

    kind = "float"

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ValueError("log-scale range needs a positive lower bound")

    def contains(self, value: Any) -> bool:
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        value = float(value)
        if not math.isfinite(value):
            return False
        floor = self.low if self.admissible_low is None else min(self.low, self.admissible_low)
        return floor <= value <= self.high

    def sample(self, rng: np.random.Generator) -> float:
        if self.scale == "log":
            return float(10.0 ** rng.uniform(math.log10(self.low), math.log10(self.high)))
        return float(rng.uniform(self.low, self.high))

    def perturb(self, value: float, rng: np.random.Generator) -> float:
        if self.scale == "log":
            center = math.log10(max(float(value), self.low))
            width = (math.log10(self.high) - math.log10(self.low)) * 0.1
            moved = 10.0 ** rng.normal(center, width)
        else:
            moved = rng.normal(float(value), (self.high - self.low) * 0.1)
        return float(np.clip(moved, self.low, self.high))

    def coerce(self, value: Any) -> float:
        return float(value)

    def to_dict(self) -> Dict[str, Any]:
        record = {"type": self.kind, "low": self.low, "high": self.high, "scale": self.scale}
        if self.admissible_low is not None:
            record["admissible_low"] = self.admissible_low
        return record


@dataclass(frozen=True)
class Categorical:
    choices: Tuple[Any, ...]

    kind = "categorical"

    def contains(self, value: Any) -> bool:
        return value in self.choices

    def sample(self, rng: np.random.Generator) -> Any:
        return self.choices[int(rng.integers(len(self.choices)))]

    def perturb(self, value: Any, rng: np.random.Generator) -> Any:
        return self.sample(rng)

    def coerce(self, value: Any) -> Any:
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind, "choices": list(self.choices)}


def parse_domain(record: Dict[str, Any]):
    kind = record.get("type")
    if kind == "int":
        return IntRange(int(record["low"]), int(record["high"]))
    if kind == "float":
        admissible = record.get("admissible_low")
        return FloatRange(
            float(record["low"]),
            float(record["high"]),
            record.get("scale", "linear"),
            None if admissible is None else float(admissible),
        )
    if kind == "categorical":
        return Categorical(tuple(record["choices"]))
    raise ValueError(f"unknown hyperparameter domain type {kind!r}")


def sample_space(space: Dict[str, Any], rng: np.random.Generator) -> Dict[str, Any]:
    """One draw per dimension, in sorted-name order so draws are reproducible"""
    return {name: space[name].sample(rng) for name in sorted(space)}
