from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Tuple


class MergePolicy(str, Enum):
    SEQUENTIAL = "sequential"  # parents' outputs only
    DIRECT = "direct"  # parents' outputs plus raw features, always
    ADAPTIVE = "adaptive"  # raw features appended only when the node's enrich flag is set


class StructureClass(str, Enum):
    LINEAR = "linear"
    ENSEMBLE = "ensemble"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class Node:
    id: int
    operation_id: str
    hyperparams: Dict[str, Any] = field(default_factory=dict, hash=False)
    parent_ids: Tuple[int, ...] = ()
    merge_policy: MergePolicy = MergePolicy.ADAPTIVE
    enrich: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parent_ids", tuple(int(p) for p in self.parent_ids))
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        object.__setattr__(self, "merge_policy", MergePolicy(self.merge_policy))

    @property
    def is_primary(self) -> bool:
        return not self.parent_ids

    @property
    def uses_raw_features(self) -> bool:
        if self.is_primary:
            return True
        if self.merge_policy == MergePolicy.DIRECT:
            return True
        return self.merge_policy == MergePolicy.ADAPTIVE and self.enrich

    def evolve(self, **changes) -> "Node":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "operation_id": self.operation_id,
            "hyperparams": dict(sorted(self.hyperparams.items())),
            "parent_ids": list(self.parent_ids),
            "merge_policy": self.merge_policy.value,
            "enrich": self.enrich,
        }
