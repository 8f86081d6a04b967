"""
Pipeline DAG: an immutable ordered collection of nodes with a single final sink.

Edits never mutate a pipeline; they return a new instance. Structural checks live in
`pipeline.validation` so that any candidate graph, valid or not, can be represented.
"""

import hashlib
import json
from typing import Dict, Iterable, List, Optional, Sequence

from dataio import TaskType
from pipeline.node import MergePolicy, Node


class Pipeline:
    def __init__(self, nodes: Iterable[Node], task=None):
        self._nodes = tuple(nodes)
        self.task = None if task is None else TaskType.parse(task)
        self._by_id = {node.id: node for node in self._nodes}

    @classmethod
    def chain(cls, operation_ids: Sequence[str], task=None, hyperparams: Optional[List[Dict]] = None) -> "Pipeline":
        """Linear pipeline, first id is the primary node and last id the sink"""
        nodes = []
        for position, operation_id in enumerate(operation_ids):
            params = hyperparams[position] if hyperparams else {}
            parents = (position - 1,) if position else ()
            nodes.append(Node(position, operation_id, params, parents))
        return cls(nodes, task)

    @property
    def nodes(self) -> List[Node]:
        return list(self._nodes)

    @property
    def node_ids(self) -> List[int]:
        return [node.id for node in self._nodes]

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._by_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Pipeline) and self._nodes == other._nodes and self.task == other.task

    def __hash__(self):
        return hash(self._nodes)

    def __repr__(self) -> str:
        parts = []
        for node in self._nodes:
            parents = ",".join(str(p) for p in node.parent_ids)
            parts.append(f"{node.id}:{node.operation_id}" + (f"<-[{parents}]" if parents else ""))
        return f"Pipeline({'; '.join(parts)})"

    def node(self, node_id: int) -> Node:
        return self._by_id[node_id]

    def children(self, node_id: int) -> List[int]:
        return [node.id for node in self._nodes if node_id in node.parent_ids]

    def sinks(self) -> List[int]:
        referenced = {parent for node in self._nodes for parent in node.parent_ids}
        return [node.id for node in self._nodes if node.id not in referenced]

    @property
    def final_node_id(self) -> Optional[int]:
        sinks = self.sinks()
        return sinks[0] if len(sinks) == 1 else None

    @property
    def final_node(self) -> Optional[Node]:
        sink = self.final_node_id
        return None if sink is None else self._by_id[sink]

    @property
    def depth(self) -> int:
        return compute_depth(self)

    @property
    def primary_nodes(self) -> List[Node]:
        return [node for node in self._nodes if node.is_primary]

    def topological_order(self) -> List[int]:
        """Kahn's order; ties resolve by position in the node list. Raises ValueError on cycles"""
        remaining = {node.id: len([p for p in set(node.parent_ids) if p in self._by_id]) for node in self._nodes}
        order = []
        ready = [node.id for node in self._nodes if remaining[node.id] == 0]
        position = {node.id: i for i, node in enumerate(self._nodes)}
        while ready:
            ready.sort(key=position.__getitem__)
            current = ready.pop(0)
            order.append(current)
            for child in self.children(current):
                remaining[child] -= 1
                if remaining[child] == 0:
                    ready.append(child)
        if len(order) != len(self._by_id):
            raise ValueError("pipeline graph contains a cycle")
        return order

    def has_cycle(self) -> bool:
        try:
            self.topological_order()
        except ValueError:
            return True
        return False

    def ancestors(self, node_id: int) -> List[int]:
        seen = []
        stack = list(self._by_id[node_id].parent_ids)
        while stack:
            current = stack.pop()
            if current in seen or current not in self._by_id:
                continue
            seen.append(current)
            stack.extend(self._by_id[current].parent_ids)
        return sorted(seen)

    def descendants(self, node_id: int) -> List[int]:
        seen = []
        stack = self.children(node_id)
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.append(current)
            stack.extend(self.children(current))
        return sorted(seen)

    def next_id(self) -> int:
        return max(self._by_id, default=-1) + 1

    # edits

    def without_node(self, node_id: int) -> "Pipeline":
        """Delete a node, wiring its parents into each child at the node's position"""
        removed = self._by_id[node_id]
        nodes = []
        for node in self._nodes:
            if node.id == node_id:
                continue
            if node_id in node.parent_ids:
                parents = []
                for parent in node.parent_ids:
                    spliced = removed.parent_ids if parent == node_id else (parent,)
                    parents.extend(p for p in spliced if p not in parents)
                node = node.evolve(parent_ids=tuple(parents))
            nodes.append(node)
        return Pipeline(nodes, self.task)

    def with_node(self, replacement: Node) -> "Pipeline":
        return Pipeline([replacement if node.id == replacement.id else node for node in self._nodes], self.task)

    def with_nodes_added(self, added: Iterable[Node]) -> "Pipeline":
        return Pipeline(list(self._nodes) + list(added), self.task)

    def subgraph(self, node_id: int) -> "Pipeline":
        """The node and everything upstream of it; the node becomes the sink"""
        keep = set(self.ancestors(node_id)) | {node_id}
        return Pipeline([node for node in self._nodes if node.id in keep], self.task)

    def with_task(self, task) -> "Pipeline":
        return Pipeline(self._nodes, task)

    def relabel_mapping(self) -> Dict[int, int]:
        """
        Dense ids 0..n-1 by post-order traversal from the sink(s), following each node's
        parent order. Parents always get smaller ids than their children and two pipelines
        that differ only in node ids relabel to the same node list.
        """
        mapping: Dict[int, int] = {}
        visiting = set()

        def visit(node_id: int):
            if node_id in mapping or node_id not in self._by_id or node_id in visiting:
                return
            visiting.add(node_id)
            for parent in self._by_id[node_id].parent_ids:
                visit(parent)
            visiting.discard(node_id)
            mapping[node_id] = len(mapping)

        for sink in self.sinks():
            visit(sink)
        for node in self._nodes:
            visit(node.id)
        return mapping

    def relabeled(self) -> "Pipeline":
        mapping = self.relabel_mapping()
        relabeled = [
            node.evolve(id=mapping[node.id], parent_ids=tuple(mapping.get(p, p) for p in node.parent_ids))
            for node in self._nodes
        ]
        relabeled.sort(key=lambda node: node.id)
        return Pipeline(relabeled, self.task)

    def to_dict(self) -> Dict:
        return {
            "task": None if self.task is None else self.task.value,
            "nodes": [node.to_dict() for node in self._nodes],
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "Pipeline":
        nodes = [
            Node(
                id=int(item["id"]),
                operation_id=item["operation_id"],
                hyperparams=item.get("hyperparams", {}),
                parent_ids=tuple(item.get("parent_ids", ())),
                merge_policy=MergePolicy(item.get("merge_policy", MergePolicy.ADAPTIVE.value)),
                enrich=bool(item.get("enrich", False)),
            )
            for item in record["nodes"]
        ]
        return cls(nodes, record.get("task"))


def compute_depth(pipeline: Pipeline) -> int:
    """Longest root-to-sink path, counted in nodes"""
    longest: Dict[int, int] = {}
    for node_id in pipeline.topological_order():
        parents = [p for p in pipeline.node(node_id).parent_ids if p in longest]
        longest[node_id] = 1 + max((longest[p] for p in parents), default=0)
    return max(longest.values(), default=0)


def _canonical_records(pipeline: Pipeline, registry=None, with_params: bool = True) -> List:
    records = []
    for node in pipeline.relabeled().nodes:
        params = node.hyperparams
        if with_params and registry is not None and node.operation_id in registry:
            params = registry.get(node.operation_id).full_params(params)
        records.append([
            node.id,
            node.operation_id,
            dict(sorted(params.items())) if with_params else {},
            list(node.parent_ids),
            # policy only matters for secondary nodes, enrich only for adaptive ones
            None if node.is_primary else node.merge_policy.value,
            bool(not node.is_primary and node.merge_policy == MergePolicy.ADAPTIVE and node.enrich),
        ])
    return records


def _plain(value):
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_signature(pipeline: Pipeline, registry=None) -> str:
    """SHA-256 of the relabeled structure with defaults merged into each node's params"""
    payload = json.dumps(_canonical_records(pipeline, registry), sort_keys=True, separators=(",", ":"), default=_plain)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def topology_signature(pipeline: Pipeline) -> str:
    """Like canonical_signature but ignoring hyperparameters"""
    payload = json.dumps(_canonical_records(pipeline, with_params=False), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
