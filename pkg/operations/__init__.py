from .base import FittedOperation, Model, NodeData, Operation, OperationKind, Stage
from .registry import (
    OperationRegistry,
    OperationSpec,
    fit_operation,
    get_registry,
    load_registry,
    op_fit,
    op_fit_transform,
    op_predict,
    registry_filter,
    restore_operation,
)

__all__ = [
    'FittedOperation', 'Model', 'NodeData', 'Operation', 'OperationKind', 'Stage',
    'OperationRegistry', 'OperationSpec', 'fit_operation', 'get_registry', 'load_registry',
    'op_fit', 'op_fit_transform', 'op_predict', 'registry_filter', 'restore_operation',
]
