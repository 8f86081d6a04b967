from .node import MergePolicy, Node, StructureClass
from .graph import Pipeline, canonical_signature, compute_depth, topology_signature
from .validation import RULES, ValidationResult, validate
from .executor import FittedPipeline, PredictionTable, evaluate_pipeline, fit, predict, rolling_forecast, score_fitted
from .dot import pipeline_to_dot

__all__ = [
    'MergePolicy', 'Node', 'StructureClass',
    'Pipeline', 'canonical_signature', 'compute_depth', 'topology_signature',
    'RULES', 'ValidationResult', 'validate',
    'FittedPipeline', 'PredictionTable', 'evaluate_pipeline', 'fit', 'predict', 'rolling_forecast', 'score_fitted',
    'pipeline_to_dot',
]
