"""
Structural validation. Violations are returned as data: the first failed rule, in a
fixed order, names the problem. Nothing here mutates the pipeline.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from dataio import TaskType
from operations.base import Stage
from pipeline.graph import Pipeline, compute_depth
from pipeline.node import StructureClass
from settings import DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES

RULES = (
    "empty_pipeline",
    "duplicate_node_id",
    "dangling_parent",
    "duplicate_parent",
    "cycle_detected",
    "isolated_node",
    "no_sink",
    "multiple_sinks",
    "too_many_nodes",
    "max_depth_exceeded",
    "max_arity_exceeded",
    "not_path_graph",
    "unequal_path_lengths",
    "unknown_operation",
    "task_incompatible",
    "invalid_hyperparams",
    "stage_mismatch",
    "sink_not_model",
)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    rule: Optional[str] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


OK = ValidationResult(True)


def _fail(rule: str, detail: str = "") -> ValidationResult:
    return ValidationResult(False, rule, detail)


def _path_lengths_equal(pipeline: Pipeline) -> bool:
    shortest, longest = {}, {}
    for node_id in pipeline.topological_order():
        parents = pipeline.node(node_id).parent_ids
        if not parents:
            shortest[node_id] = longest[node_id] = 1
            continue
        shortest[node_id] = 1 + min(shortest[p] for p in parents)
        longest[node_id] = 1 + max(longest[p] for p in parents)
        if shortest[node_id] != longest[node_id]:
            return False
    return True


def validate(
    pipeline: Pipeline,
    structure_class=StructureClass.COMPOSITE,
    max_depth: int = DEFAULT_MAX_DEPTH,
    registry=None,
    task=None,
    max_nodes: int = DEFAULT_MAX_NODES,
    max_arity: Optional[int] = None,
) -> ValidationResult:
    structure_class = StructureClass(structure_class)
    task = TaskType.parse(task) if task is not None else pipeline.task
    nodes = pipeline.nodes

    if not nodes:
        return _fail("empty_pipeline")

    counts = Counter(node.id for node in nodes)
    duplicated = sorted(node_id for node_id, count in counts.items() if count > 1)
    if duplicated:
        return _fail("duplicate_node_id", f"ids {duplicated}")

    for node in nodes:
        missing = [p for p in node.parent_ids if p not in pipeline]
        if missing:
            return _fail("dangling_parent", f"node {node.id} references {missing}")
    for node in nodes:
        if len(set(node.parent_ids)) != len(node.parent_ids) or node.id in node.parent_ids:
            return _fail("duplicate_parent" if node.id not in node.parent_ids else "cycle_detected", f"node {node.id}")

    if pipeline.has_cycle():
        return _fail("cycle_detected")

    sinks = pipeline.sinks()
    if len(nodes) > 1:
        for node in nodes:
            if node.is_primary and node.id in sinks:
                return _fail("isolated_node", f"node {node.id}")
    if not sinks:
        return _fail("no_sink")
    if len(sinks) > 1:
        return _fail("multiple_sinks", f"sinks {sinks}")

    if len(nodes) > max_nodes:
        return _fail("too_many_nodes", f"{len(nodes)} > {max_nodes}")
    depth = compute_depth(pipeline)
    if depth > max_depth:
        return _fail("max_depth_exceeded", f"{depth} > {max_depth}")
    if max_arity is not None:
        for node in nodes:
            if len(node.parent_ids) > max_arity:
                return _fail("max_arity_exceeded", f"node {node.id} has {len(node.parent_ids)} parents")

    if structure_class == StructureClass.LINEAR:
        for node in nodes:
            if len(node.parent_ids) > 1 or len(pipeline.children(node.id)) > 1:
                return _fail("not_path_graph", f"node {node.id}")
    elif structure_class == StructureClass.ENSEMBLE:
        if not _path_lengths_equal(pipeline):
            return _fail("unequal_path_lengths")

    if registry is None:
        return OK

    for node in nodes:
        if node.operation_id not in registry:
            return _fail("unknown_operation", node.operation_id)
    specs = {node.id: registry.get(node.operation_id) for node in nodes}

    if task is not None:
        for node in nodes:
            if not specs[node.id].supports(task):
                return _fail("task_incompatible", f"{node.operation_id} does not support {task.value}")

    for node in nodes:
        problem = specs[node.id].params_problem(node.hyperparams)
        if problem is not None:
            name, value, reason = problem
            return _fail("invalid_hyperparams", f"node {node.id} {node.operation_id}.{name}={value!r}: {reason}")

    raw_stage = None if task is None else (Stage.SERIES if task == TaskType.TS_FORECASTING else Stage.TABLE)
    for node in nodes:
        spec = specs[node.id]
        if node.is_primary:
            if raw_stage is not None and spec.accepts != raw_stage:
                return _fail("stage_mismatch", f"primary node {node.id} cannot read {raw_stage.value} input")
            continue
        for parent in node.parent_ids:
            if specs[parent].emits != spec.accepts:
                return _fail("stage_mismatch", f"node {parent} -> node {node.id}")

    sink = specs[sinks[0]]
    if not sink.is_model or sink.emits != Stage.TABLE:
        return _fail("sink_not_model", f"final node runs {sink.operation_id}")
    return OK
