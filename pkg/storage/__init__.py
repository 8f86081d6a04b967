import os

from .base import PipelineBundle, PipelineStore
from .document import NodeRecord, PipelineDocument, build_document, document_pipeline, parse_document
from .fitted_state import decode_container, encode_container, read_container, write_container
from .local_storage import LocalPipelineStore, export_pipeline, fitted_path, import_pipeline
from .manifest import MANIFEST_NAME, RunManifest, file_sha256, load_manifest, write_manifest

_pipeline_store = None


def get_pipeline_store() -> PipelineStore:
    """Global store instance; PIPEFORGE_STORE selects the backend"""
    global _pipeline_store
    if _pipeline_store is None:
        backend = os.getenv('PIPEFORGE_STORE', 'local')
        if backend != 'local':
            raise ValueError(f"Unknown pipeline store backend: {backend}")
        _pipeline_store = LocalPipelineStore()
    return _pipeline_store


__all__ = [
    'PipelineBundle', 'PipelineStore', 'LocalPipelineStore', 'get_pipeline_store',
    'NodeRecord', 'PipelineDocument', 'build_document', 'document_pipeline', 'parse_document',
    'decode_container', 'encode_container', 'read_container', 'write_container',
    'export_pipeline', 'fitted_path', 'import_pipeline',
    'MANIFEST_NAME', 'RunManifest', 'file_sha256', 'load_manifest', 'write_manifest',
]
