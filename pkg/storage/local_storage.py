"""
Export to and import from a local directory:

    out_dir/
        pipeline.json
        fitted_operations/operation_<id>.pfop
        data/train.csv, data/validation.csv
"""

import logging
import os
from typing import Any, Dict, Optional, Tuple

from atomization import AtomizedOperation, atomized_source, fitted_from_state
from dataio import Dataset, TaskType
from errors import DanglingReferenceError, IoError, SchemaError
from operations.registry import OperationRegistry, get_registry, restore_operation
from pipeline.executor import FittedPipeline
from pipeline.graph import Pipeline
from settings import CONTAINER_EXTENSION

from .base import PipelineBundle, PipelineStore
from .document import PipelineDocument, build_document, document_pipeline, parse_document
from .fitted_state import read_container, write_container

logger = logging.getLogger(__name__)

DOCUMENT_NAME = "pipeline.json"
FITTED_DIR = "fitted_operations"
DATA_DIR = "data"

# Pipeline-level facts every container repeats so any one of them restores the whole
CONTEXT_KEY = "pipeline"


def fitted_path(node_id: int) -> str:
    return f"{FITTED_DIR}/operation_{node_id}.{CONTAINER_EXTENSION}"


def nested_documents(pipeline: Pipeline, registry: OperationRegistry) -> Dict[str, Tuple[PipelineDocument, bool]]:
    """Inner documents for every atomized operation the pipeline uses, recursively"""
    nested = {}
    for node in pipeline.nodes:
        if node.operation_id in nested:
            continue
        source = atomized_source(registry.get(node.operation_id))
        if source is None:
            continue
        inner, inner_registry, refit = source
        document = build_document(inner, inner_registry, nested=nested_documents(inner, inner_registry))
        nested[node.operation_id] = (document, refit)
    return nested


def _context(fitted: FittedPipeline) -> Dict[str, Any]:
    return {
        "raw_width": fitted.raw_width,
        "n_classes": fitted.n_classes,
        "horizon": fitted.horizon,
        "seed": fitted.seed,
        "feature_names": list(fitted.feature_names),
        "category_maps": fitted.category_maps,
        "target_name": fitted.target_name,
    }


class LocalPipelineStore(PipelineStore):
    def export_pipeline(self, pipeline, out_dir, fitted=None, train=None, validation=None, registry=None) -> PipelineDocument:
        if fitted is not None:
            fitted = fitted.relabeled()
            pipeline = fitted.pipeline if fitted.pipeline.task is not None else fitted.pipeline.with_task(fitted.task)
            registry = fitted.registry
        else:
            pipeline = pipeline.relabeled()
            registry = registry or get_registry()
        if pipeline.final_node_id is None:
            raise SchemaError("pipeline", "no unique final node to export")

        try:
            os.makedirs(out_dir, exist_ok=True)
            paths = {}
            if fitted is not None:
                os.makedirs(os.path.join(out_dir, FITTED_DIR), exist_ok=True)
                context = _context(fitted)
                for node_id, operation in sorted(fitted.operations.items()):
                    record = operation.to_record()
                    record[CONTEXT_KEY] = context
                    paths[node_id] = fitted_path(node_id)
                    write_container(os.path.join(out_dir, paths[node_id]), record, node_id)

            document = build_document(pipeline, registry, paths, nested_documents(pipeline, registry))
            with open(os.path.join(out_dir, DOCUMENT_NAME), "w", encoding="utf-8") as handle:
                handle.write(document.to_json())

            for name, data in (("train", train), ("validation", validation)):
                if data is not None:
                    os.makedirs(os.path.join(out_dir, DATA_DIR), exist_ok=True)
                    data.write_csv(os.path.join(out_dir, DATA_DIR, f"{name}.csv"))
        except OSError as exc:
            raise IoError(f"cannot export to {out_dir}: {exc}") from exc

        logger.info("exported %d-node pipeline to %s (fitted=%s)", len(pipeline), out_dir, fitted is not None)
        return document

    def import_pipeline(self, path, registry=None) -> PipelineBundle:
        document_path = path if path.endswith(".json") else os.path.join(path, DOCUMENT_NAME)
        base_dir = os.path.dirname(os.path.abspath(document_path))
        try:
            with open(document_path, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise IoError(f"cannot read {document_path}: {exc}") from exc

        document = parse_document(text, document_path)
        registry = registry or get_registry()
        containers = self._read_containers(document, base_dir)
        registry = self._register_atomized(document, registry, containers, document_path)
        pipeline = document_pipeline(document, document_path)
        for node in pipeline.nodes:
            registry.get(node.operation_id)

        fitted = None
        if document.nodes and all(record.fitted_operation_path for record in document.nodes):
            fitted = self._restore_fitted(pipeline, containers, registry)
        logger.info("imported %d-node pipeline from %s (fitted=%s)", len(pipeline), document_path, fitted is not None)
        return PipelineBundle(pipeline=pipeline, fitted=fitted, registry=registry, document=document)

    @staticmethod
    def _read_containers(document: PipelineDocument, base_dir: str) -> Dict[int, Dict[str, Any]]:
        containers = {}
        for record in document.nodes:
            if not record.fitted_operation_path:
                continue
            full_path = os.path.join(base_dir, record.fitted_operation_path)
            if not os.path.isfile(full_path):
                raise DanglingReferenceError(f"node {record.operation_id}: fitted state {record.fitted_operation_path} not found")
            try:
                containers[record.operation_id] = read_container(full_path)
            except OSError as exc:
                raise IoError(f"cannot read {full_path}: {exc}") from exc
            if containers[record.operation_id]["operation_id"] != record.operation_type:
                raise SchemaError(full_path, f"holds {containers[record.operation_id]['operation_id']}, node is {record.operation_type}")
        return containers

    def _register_atomized(self, document: PipelineDocument, registry: OperationRegistry,
                           containers: Dict[int, Dict[str, Any]], location: str) -> OperationRegistry:
        for position, record in enumerate(document.nodes):
            if record.atomized_pipeline is None or record.operation_type in registry:
                continue
            inner_location = f"{location}.nodes[{position}].atomized_pipeline"
            inner_registry = self._register_atomized(record.atomized_pipeline, registry, {}, inner_location)
            inner = document_pipeline(record.atomized_pipeline, inner_location)
            if inner.task is None:
                raise SchemaError(f"{inner_location}.task", "atomized pipelines must declare their task")
            prefitted = None
            if record.operation_id in containers:
                prefitted = fitted_from_state(inner, containers[record.operation_id]["state"], inner_registry)
            atomized = AtomizedOperation(inner, inner_registry, prefitted, bool(record.atomized_refit), name=record.operation_type)
            registry = atomized.register(registry)
        return registry

    @staticmethod
    def _restore_fitted(pipeline: Pipeline, containers: Dict[int, Dict[str, Any]], registry: OperationRegistry) -> FittedPipeline:
        try:
            operations = {node_id: restore_operation(registry, record) for node_id, record in containers.items()}
            context = containers[pipeline.final_node_id][CONTEXT_KEY]
        except KeyError as exc:
            raise SchemaError("fitted_operations", f"container is missing {exc}") from exc
        task = pipeline.task or operations[pipeline.final_node_id].task
        return FittedPipeline(
            pipeline=pipeline if pipeline.task is not None else pipeline.with_task(task),
            operations=operations,
            registry=registry,
            raw_width=int(context["raw_width"]),
            task=TaskType.parse(task),
            n_classes=int(context["n_classes"]),
            horizon=int(context["horizon"]),
            feature_names=context.get("feature_names"),
            seed=int(context["seed"]),
            category_maps=context.get("category_maps"),
            target_name=context.get("target_name", "target"),
        )


def export_pipeline(pipeline: Pipeline, out_dir: str, fitted: Optional[FittedPipeline] = None,
                    train: Optional[Dataset] = None, validation: Optional[Dataset] = None,
                    registry: Optional[OperationRegistry] = None) -> PipelineDocument:
    return LocalPipelineStore().export_pipeline(pipeline, out_dir, fitted, train, validation, registry)


def import_pipeline(path: str, registry: Optional[OperationRegistry] = None) -> PipelineBundle:
    return LocalPipelineStore().import_pipeline(path, registry)


