"""
Per-generation run telemetry: one CSV row per generation, plus an optional
convergence and memory plot.
"""

import csv
import os
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import psutil


def memory_mb() -> float:
    process = psutil.Process(os.getpid())
    return process.memory_info().rss / 1024 / 1024


@dataclass
class GenerationStats:
    generation: int
    best: float
    median: float
    diversity: int
    cache_hit_rate: float
    rss_mb: float
    elapsed_seconds: float
    crossover_rate: float
    mutation_rate: float
    evaluations: int


FIELDNAMES = [f.name for f in fields(GenerationStats)]


def population_stats(generation: int, population, best_quality: float, cache_hit_rate: float, elapsed: float,
                     crossover_rate: float, mutation_rate: float, evaluations: int) -> GenerationStats:
    qualities = [ind.quality for ind in population if ind.evaluated]
    return GenerationStats(
        generation=generation,
        best=float(best_quality),
        median=float(np.median(qualities)) if qualities else float("nan"),
        diversity=len({ind.signature for ind in population}),
        cache_hit_rate=float(cache_hit_rate),
        rss_mb=memory_mb(),
        elapsed_seconds=float(elapsed),
        crossover_rate=float(crossover_rate),
        mutation_rate=float(mutation_rate),
        evaluations=int(evaluations),
    )


class TelemetryLog:
    """Keeps rows in memory; appends each to `path` as it arrives when a path is set"""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.rows: List[GenerationStats] = []
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as csvfile:
                csv.DictWriter(csvfile, fieldnames=FIELDNAMES).writeheader()

    def append(self, stats: GenerationStats):
        self.rows.append(stats)
        if self.path:
            with open(self.path, "a", newline="", encoding="utf-8") as csvfile:
                csv.DictWriter(csvfile, fieldnames=FIELDNAMES).writerow(asdict(stats))

    def __len__(self) -> int:
        return len(self.rows)

    def to_records(self) -> List[dict]:
        return [asdict(row) for row in self.rows]


def read_telemetry(path: str) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as csvfile:
        return list(csv.DictReader(csvfile))


def write_convergence_plot(path: str, rows: Sequence[GenerationStats]):
    generations = [row.generation for row in rows]
    fig, (fitness_ax, memory_ax) = plt.subplots(1, 2, figsize=(11, 4))

    fitness_ax.plot(generations, [row.best for row in rows], label="best", linewidth=2)
    fitness_ax.plot(generations, [row.median for row in rows], label="median", linestyle="--")
    fitness_ax.set_xlabel("Generation")
    fitness_ax.set_ylabel("Fitness")
    fitness_ax.set_title("Convergence")
    fitness_ax.legend()

    memory_ax.plot(generations, [row.rss_mb for row in rows], color="tab:red")
    memory_ax.set_xlabel("Generation")
    memory_ax.set_ylabel("Resident memory (MB)")
    memory_ax.set_title("Memory")

    fig.tight_layout()
    fig.savefig(path, dpi=180)
    plt.close(fig)
