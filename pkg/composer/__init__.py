from .config import AdaptiveScheme, ComposerConfig, Objective, SelectionType
from .individual import Individual, ParetoFront, dominates
from .cache import FitnessCache
from .evaluation import Evaluator, evaluate_population, evaluation_seed
from .growth import PipelineGrower, init_population
from .operators import CROSSOVERS, EXPLOITATION, EXPLORATION, MUTATIONS, Reproducer, crossover, mutate, reproduce
from .selection import crowding_distance, non_dominated_sort, select_parents, select_survivors
from .adaptive import RateController, update_adaptive_rates
from .regularization import regularize
from .telemetry import GenerationStats, TelemetryLog, read_telemetry, write_convergence_plot
from .evolution import EvolutionaryComposer, compose, make_validator
from .enumeration import enumerate_pipelines, exhaustive_optimum

__all__ = [
    'AdaptiveScheme', 'ComposerConfig', 'Objective', 'SelectionType',
    'Individual', 'ParetoFront', 'dominates',
    'FitnessCache',
    'Evaluator', 'evaluate_population', 'evaluation_seed',
    'PipelineGrower', 'init_population',
    'CROSSOVERS', 'EXPLOITATION', 'EXPLORATION', 'MUTATIONS', 'Reproducer', 'crossover', 'mutate', 'reproduce',
    'crowding_distance', 'non_dominated_sort', 'select_parents', 'select_survivors',
    'RateController', 'update_adaptive_rates',
    'regularize',
    'GenerationStats', 'TelemetryLog', 'read_telemetry', 'write_convergence_plot',
    'EvolutionaryComposer', 'compose', 'make_validator',
    'enumerate_pipelines', 'exhaustive_optimum',
]
