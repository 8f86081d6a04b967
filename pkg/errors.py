"""
Exception hierarchy shared by every PipeForge module.
"""

from typing import Any, Optional


class PipeForgeError(Exception):
    """Base class for all framework errors"""


# pipeline execution

class OperationFitError(PipeForgeError):
    def __init__(self, node_id: int, message: str = ""):
        self.node_id = node_id
        super().__init__(f"node {node_id}: {message or 'operation failed to fit'}")


class DataShapeError(PipeForgeError):
    pass


class SchemaMismatchError(PipeForgeError):
    def __init__(self, expected: int, actual: int, where: str = "input"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{where} has {actual} feature columns, expected {expected}")


class UnseenCategoryError(SchemaMismatchError):
    """A categorical cell whose value the fitted pipeline never saw in training"""

    def __init__(self, column: str, value: str, row: Optional[int] = None, known: int = 0):
        self.column = column
        self.value = value
        self.row = row
        self.expected = known
        self.actual = known + 1
        where = f"row {row}, " if row is not None else ""
        PipeForgeError.__init__(self, f"{where}column {column!r}: category {value!r} unseen in training ({known} known)")


# operations

class SingularFitError(PipeForgeError):
    pass


class InvalidHyperparamError(PipeForgeError):
    def __init__(self, operation_id: str, name: str, value: Any, reason: str = "outside declared space"):
        self.operation_id = operation_id
        self.name = name
        self.value = value
        super().__init__(f"{operation_id}.{name}={value!r}: {reason}")


class UnknownOperationError(PipeForgeError):
    def __init__(self, operation_id: str):
        self.operation_id = operation_id
        super().__init__(f"unknown operation: {operation_id}")


# data

class ParseError(PipeForgeError):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)


class MissingTargetError(PipeForgeError):
    pass


class TooFewRowsError(PipeForgeError):
    pass


class ZeroDenominatorError(PipeForgeError):
    pass


class DegenerateClassError(PipeForgeError):
    pass


# composer

class BudgetExhaustedBeforeFirstEvaluation(PipeForgeError):
    """Raised when the time budget ran out during generation 0; `front` holds what was evaluated"""

    def __init__(self, front: Any = None):
        self.front = front
        super().__init__("time budget exhausted before the initial population was evaluated")


class InitialAssumptionInvalidError(PipeForgeError):
    def __init__(self, pipeline: Any, rule: str):
        self.pipeline = pipeline
        self.rule = rule
        super().__init__(f"initial pipeline {pipeline!r} is invalid: {rule}")


class ReproductionStallError(PipeForgeError):
    pass


# tuner / sensitivity

class UntunableError(PipeForgeError):
    pass


class NodeNotModifiableError(PipeForgeError):
    def __init__(self, node_id: int, reason: str):
        self.node_id = node_id
        self.reason = reason
        super().__init__(f"node {node_id} cannot be modified: {reason}")


# persistence

class SchemaError(PipeForgeError):
    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class DanglingReferenceError(PipeForgeError):
    pass


class UnserializableStateError(PipeForgeError):
    def __init__(self, node_id: Any, message: str):
        self.node_id = node_id
        super().__init__(f"node {node_id}: {message}")


class IoError(PipeForgeError):
    pass
