"""
Framework-wide constants and environment lookups.
"""

import os

PIPEFORGE_VERSION = "0.3.0"

# Environment variables
REGISTRY_ENV = "PIPEFORGE_REGISTRY"
LOG_LEVEL_ENV = "PIPEFORGE_LOG_LEVEL"

DEFAULT_REGISTRY_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "operations", "registry.json")

# Structural bounds
DEFAULT_MAX_DEPTH = 5
DEFAULT_MAX_NODES = 15
DEFAULT_MAX_ARITY = 2

# Classifier probabilities are clipped before anything downstream reads them
PROBABILITY_CLIP = (1e-6, 1.0 - 1e-6)

# Evolution
FITNESS_SPLIT_RATIO = 0.75
REPRODUCTION_RETRIES = 20
TOURNAMENT_SIZE = 3
RATE_BOUNDS = (0.05, 0.95)
RATE_TARGET_SUCCESS = 0.2
RATE_STEP = 0.1
RATE_WINDOW = 50

# Regularization accepts a simplification whose quality is within this of the original
QUALITY_TOLERANCE = 1e-9

# Tuning
TUNING_ITERATIONS = 100
PERTURB_EVERY = 5

# Fitted-state container
CONTAINER_MAGIC = b"PFOP"
CONTAINER_VERSION = 1
CONTAINER_EXTENSION = "pfop"


def registry_path() -> str:
    """Registry JSON to load: $PIPEFORGE_REGISTRY or the bundled file"""
    return os.getenv(REGISTRY_ENV) or DEFAULT_REGISTRY_PATH


def log_level(default: str = "WARNING") -> str:
    return os.getenv(LOG_LEVEL_ENV, default).upper()
