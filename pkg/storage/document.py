"""
`pipeline.json`: the pipeline document and its conversion to and from Pipeline.
"""

import json
from collections import Counter
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import DanglingReferenceError, SchemaError
from pipeline.graph import Pipeline, compute_depth
from pipeline.node import MergePolicy, Node
from settings import PIPEFORGE_VERSION


def _plain(value):
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


class NodeRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    operation_id: int = Field(ge=0)
    operation_type: str
    operation_name: str
    custom_params: Dict[str, Any] = Field(default_factory=dict)
    params: Dict[str, Any] = Field(default_factory=dict)
    nodes_from: List[int] = Field(default_factory=list)
    merge_policy: MergePolicy = MergePolicy.ADAPTIVE
    enrich: bool = False
    fitted_operation_path: Optional[str] = None
    atomized_pipeline: Optional["PipelineDocument"] = None
    atomized_refit: Optional[bool] = None


class PipelineDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: str = PIPEFORGE_VERSION
    task: Optional[str] = None
    total_pipeline_operations: Dict[str, int] = Field(default_factory=dict)
    depth: int = Field(ge=0)
    nodes: List[NodeRecord]

    def to_json(self) -> str:
        record = self.model_dump(mode="json", exclude_none=True)
        return json.dumps(record, indent=4, ensure_ascii=False, default=_plain) + "\n"

    def check(self, location: str = "pipeline.json"):
        """Structural consistency beyond field types"""
        ids = [node.operation_id for node in self.nodes]
        if sorted(ids) != list(range(len(ids))):
            raise SchemaError(f"{location}.nodes", f"operation ids must be dense 0..{len(ids) - 1}, got {ids}")
        for position, node in enumerate(self.nodes):
            missing = [parent for parent in node.nodes_from if parent not in ids]
            if missing:
                raise DanglingReferenceError(f"{location}.nodes[{position}].nodes_from references missing nodes {missing}")
            extra = {name: value for name, value in node.custom_params.items() if node.params.get(name) != value}
            if extra:
                raise SchemaError(f"{location}.nodes[{position}].params", f"custom params {sorted(extra)} not reflected in params")
        recount = dict(sorted(Counter(node.operation_type for node in self.nodes).items()))
        if recount != dict(sorted(self.total_pipeline_operations.items())):
            raise SchemaError(f"{location}.total_pipeline_operations", f"expected {recount}")


NodeRecord.model_rebuild()


def _plain_params(params: Dict[str, Any]) -> Dict[str, Any]:
    return {name: params[name].item() if hasattr(params[name], "item") else params[name] for name in sorted(params)}


def parse_document(text: str, location: str = "pipeline.json") -> PipelineDocument:
    try:
        document = PipelineDocument.model_validate_json(text)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise SchemaError(f"{location}.{field}" if field else location, error["msg"]) from exc
    document.check(location)
    return document


def build_document(pipeline: Pipeline, registry, fitted_paths: Optional[Dict[int, str]] = None, nested=None) -> PipelineDocument:
    """
    `pipeline` must already carry dense ids. `nested` maps an atomized operation id to
    (inner document, refit flag).
    """
    fitted_paths = fitted_paths or {}
    nested = nested or {}
    records = []
    for node in sorted(pipeline.nodes, key=lambda n: n.id):
        spec = registry.get(node.operation_id)
        inner = nested.get(node.operation_id)
        records.append(
            NodeRecord(
                operation_id=node.id,
                operation_type=node.operation_id,
                operation_name=spec.display_name,
                custom_params=_plain_params(node.hyperparams),
                params=_plain_params(spec.full_params(node.hyperparams)),
                nodes_from=list(node.parent_ids),
                merge_policy=node.merge_policy,
                enrich=node.enrich,
                fitted_operation_path=fitted_paths.get(node.id),
                atomized_pipeline=None if inner is None else inner[0],
                atomized_refit=None if inner is None else inner[1],
            )
        )
    counts = Counter(node.operation_id for node in pipeline.nodes)
    return PipelineDocument(
        task=None if pipeline.task is None else pipeline.task.value,
        total_pipeline_operations=dict(sorted(counts.items())),
        depth=compute_depth(pipeline),
        nodes=records,
    )


def document_pipeline(document: PipelineDocument, location: str = "pipeline.json") -> Pipeline:
    nodes = [
        Node(
            id=record.operation_id,
            operation_id=record.operation_type,
            hyperparams=dict(record.custom_params),
            parent_ids=tuple(record.nodes_from),
            merge_policy=record.merge_policy,
            enrich=record.enrich,
        )
        for record in document.nodes
    ]
    pipeline = Pipeline(nodes, document.task)
    if pipeline.has_cycle():
        raise SchemaError(f"{location}.nodes", "nodes_from forms a cycle")
    if compute_depth(pipeline) != document.depth:
        raise SchemaError(f"{location}.depth", f"graph depth is {compute_depth(pipeline)}")
    return pipeline
