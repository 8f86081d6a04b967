from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

from dataio import Dataset
from operations.registry import OperationRegistry
from pipeline.executor import FittedPipeline
from pipeline.graph import Pipeline

from .document import PipelineDocument


@dataclass
class PipelineBundle:
    """What an import returns; `registry` includes any atomized operations found"""
    pipeline: Pipeline
    fitted: Optional[FittedPipeline]
    registry: OperationRegistry
    document: Optional[PipelineDocument] = field(default=None, repr=False)

    @property
    def is_fitted(self) -> bool:
        return self.fitted is not None


class PipelineStore(ABC):
    @abstractmethod
    def export_pipeline(
        self,
        pipeline: Pipeline,
        out_dir: str,
        fitted: Optional[FittedPipeline] = None,
        train: Optional[Dataset] = None,
        validation: Optional[Dataset] = None,
        registry: Optional[OperationRegistry] = None,
    ) -> PipelineDocument:
        """Write pipeline.json, fitted states and the optional data archive"""
        pass

    @abstractmethod
    def import_pipeline(self, path: str, registry: Optional[OperationRegistry] = None) -> PipelineBundle:
        """Read an exported pipeline back, with fitted states when present"""
        pass
