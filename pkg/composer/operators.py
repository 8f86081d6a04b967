"""
Reproduction: two crossover types and six mutation types, wrapped in a bounded
validation loop. Mutations split into an exploration group that grows structure and
an exploitation group that refines it.
"""

import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from composer.growth import PipelineGrower
from composer.individual import Individual
from errors import ReproductionStallError
from pipeline.graph import Pipeline
from pipeline.node import MergePolicy, Node
from settings import REPRODUCTION_RETRIES

logger = logging.getLogger(__name__)

CROSSOVERS = ("subtree_exchange", "one_point")
EXPLORATION = ("add_node", "add_subtree", "replace_subtree")
EXPLOITATION = ("change_operation", "change_hyperparams", "remove_node")
MUTATIONS = EXPLORATION + EXPLOITATION

OPERATOR_FAILURES = (LookupError, ValueError, KeyError)


def prune_to_sink(pipeline: Pipeline, sink_id: int) -> Pipeline:
    keep = set(pipeline.ancestors(sink_id)) | {sink_id}
    return Pipeline([node for node in pipeline.nodes if node.id in keep], pipeline.task)


def _renumbered(nodes: List[Node], start: int) -> Tuple[List[Node], Dict[int, int]]:
    mapping = {node.id: start + position for position, node in enumerate(nodes)}
    moved = [node.evolve(id=mapping[node.id], parent_ids=tuple(mapping.get(p, p) for p in node.parent_ids)) for node in nodes]
    return moved, mapping


def graft(target: Pipeline, node_id: int, donor: Pipeline) -> Pipeline:
    """Replace the subtree rooted at `node_id` by `donor`, whose sink takes its place"""
    donor_nodes, mapping = _renumbered(donor.nodes, target.next_id())
    donor_sink = mapping[donor.final_node_id]
    if node_id == target.final_node_id:
        return Pipeline(donor_nodes, target.task)
    nodes = [
        node.evolve(parent_ids=tuple(donor_sink if p == node_id else p for p in node.parent_ids))
        for node in target.nodes
        if node.id != node_id
    ]
    return prune_to_sink(Pipeline(nodes + donor_nodes, target.task), target.final_node_id)


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


# crossover

def subtree_exchange(first: Pipeline, second: Pipeline, rng: np.random.Generator) -> Tuple[Pipeline, Pipeline]:
    a = _pick(rng, first.node_ids)
    b = _pick(rng, second.node_ids)
    return graft(first, a, second.subgraph(b)), graft(second, b, first.subgraph(a))


def one_point(first: Pipeline, second: Pipeline, rng: np.random.Generator) -> Pipeline:
    """
    Cut both topological encodings: keep a prefix of `first`, append a suffix of `second`
    (which always ends in its sink), and reconnect the suffix's references to dropped
    nodes onto random prefix nodes.
    """
    order_a = first.topological_order()
    order_b = second.topological_order()
    prefix = [first.node(node_id) for node_id in order_a[: int(rng.integers(1, len(order_a) + 1))]]
    suffix = [second.node(node_id) for node_id in order_b[int(rng.integers(0, len(order_b))):]]
    suffix, mapping = _renumbered(suffix, first.next_id())
    prefix_ids = [node.id for node in prefix]
    reconnected = []
    for node in suffix:
        parents = []
        for parent in node.parent_ids:
            resolved = parent if parent in mapping.values() else _pick(rng, prefix_ids)
            if resolved not in parents:
                parents.append(resolved)
        reconnected.append(node.evolve(parent_ids=tuple(parents)))
    sink = mapping[order_b[-1]]
    return prune_to_sink(Pipeline(prefix + reconnected, first.task), sink)


def crossover(kind: str, first: Pipeline, second: Pipeline, rng: np.random.Generator) -> Tuple[Pipeline, Pipeline]:
    if kind == "subtree_exchange":
        return subtree_exchange(first, second, rng)
    return one_point(first, second, rng), one_point(second, first, rng)


# mutation

def _spec(grower: PipelineGrower, operation_id: str):
    return grower.registry.get(operation_id)


def add_node(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    target = pipeline.node(_pick(rng, pipeline.node_ids))
    spec = _spec(grower, target.operation_id)
    new_id = pipeline.next_id()
    if rng.random() < 0.5:
        # insert after the target, on one of its outgoing edges (or as the new sink)
        is_sink = target.id == pipeline.final_node_id
        options = grower.options(spec.emits, False, model_only=is_sink, accepts=spec.emits)
        inserted = Node(new_id, _pick(rng, options).operation_id, {}, (target.id,))
        if is_sink:
            return pipeline.with_nodes_added([inserted])
        child = pipeline.node(_pick(rng, pipeline.children(target.id)))
        rewired = child.evolve(parent_ids=tuple(new_id if p == target.id else p for p in child.parent_ids))
        return pipeline.with_node(rewired).with_nodes_added([inserted])
    # new primary parent feeding the target
    options = grower.options(spec.accepts, True)
    added = Node(new_id, _pick(rng, options).operation_id)
    return pipeline.with_node(target.evolve(parent_ids=target.parent_ids + (new_id,))).with_nodes_added([added])


def add_subtree(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    target = pipeline.node(_pick(rng, pipeline.node_ids))
    spec = _spec(grower, target.operation_id)
    nodes: List[Node] = []
    root = grower.grow_node(rng, nodes, spec.accepts, int(rng.integers(1, 3)), next_id=pipeline.next_id())
    return pipeline.with_node(target.evolve(parent_ids=target.parent_ids + (root,))).with_nodes_added(nodes)


def replace_subtree(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    target = pipeline.node(_pick(rng, pipeline.node_ids))
    spec = _spec(grower, target.operation_id)
    is_sink = target.id == pipeline.final_node_id
    nodes: List[Node] = []
    grower.grow_node(rng, nodes, spec.emits, int(rng.integers(1, 3)), model_only=is_sink)
    return graft(pipeline, target.id, Pipeline(nodes, pipeline.task))


def change_operation(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    target = pipeline.node(_pick(rng, pipeline.node_ids))
    spec = _spec(grower, target.operation_id)
    is_sink = target.id == pipeline.final_node_id
    options = [
        option
        for option in grower.options(spec.emits, target.is_primary, model_only=is_sink, accepts=spec.accepts)
        if option.operation_id != target.operation_id
    ]
    if not options:
        raise LookupError(f"no alternative to {target.operation_id}")
    return pipeline.with_node(target.evolve(operation_id=_pick(rng, options).operation_id, hyperparams={}))


def change_hyperparams(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    """Resample one hyperparameter; on secondary nodes may flip the enrichment flag instead"""
    candidates = [
        node for node in pipeline.nodes
        if _spec(grower, node.operation_id).hyperparam_space or not node.is_primary
    ]
    if not candidates:
        raise LookupError("no node has tunable settings")
    target = _pick(rng, candidates)
    space = _spec(grower, target.operation_id).hyperparam_space
    if not target.is_primary and (not space or rng.random() < 0.25):
        return pipeline.with_node(target.evolve(merge_policy=MergePolicy.ADAPTIVE, enrich=not target.enrich))
    name = _pick(rng, sorted(space))
    params = dict(target.hyperparams)
    params[name] = space[name].perturb(params[name], rng) if name in params else space[name].sample(rng)
    return pipeline.with_node(target.evolve(hyperparams=params))


def remove_node(pipeline: Pipeline, rng, grower: PipelineGrower) -> Pipeline:
    if len(pipeline) < 2:
        raise LookupError("cannot remove the only node")
    sink = pipeline.final_node_id
    removable = [node_id for node_id in pipeline.node_ids if node_id != sink]
    if len(pipeline.node(sink).parent_ids) == 1:
        removable.append(sink)
    return pipeline.without_node(_pick(rng, removable))


MUTATION_FUNCTIONS: Dict[str, Callable] = {
    "add_node": add_node,
    "add_subtree": add_subtree,
    "replace_subtree": replace_subtree,
    "change_operation": change_operation,
    "change_hyperparams": change_hyperparams,
    "remove_node": remove_node,
}


def mutate(kind: str, pipeline: Pipeline, rng: np.random.Generator, grower: PipelineGrower) -> Pipeline:
    return MUTATION_FUNCTIONS[kind](pipeline, rng, grower)


class Reproducer:
    def __init__(self, grower: PipelineGrower, validate_fn: Callable, rng: np.random.Generator, retries: int = REPRODUCTION_RETRIES):
        self.grower = grower
        self.validate_fn = validate_fn
        self.rng = rng
        self.retries = retries
        self.stalls = 0

    def _attempt(self, first: Individual, second: Individual, crossover_rate: float, mutation_rate: float):
        rng = self.rng
        operators: List[str] = []
        a, b = first.pipeline, second.pipeline
        if rng.random() < crossover_rate:
            kind = _pick(rng, CROSSOVERS)
            a, b = crossover(kind, a, b, rng)
            operators.append(kind)
        children = []
        for child in (a, b):
            child_operators = list(operators)
            if rng.random() < mutation_rate:
                kind = _pick(rng, MUTATIONS)
                try:
                    child = mutate(kind, child, rng, self.grower)
                    child_operators.append(kind)
                except OPERATOR_FAILURES as exc:
                    logger.debug("mutation %s not applicable: %s", kind, exc)
                    child = None
            children.append((child, tuple(child_operators)))
        return children

    def _fallback(self, parent: Individual) -> Individual:
        """Copy of the parent with one forced exploitation mutation, or a plain copy"""
        for kind in [_pick(self.rng, EXPLOITATION)] + list(EXPLOITATION):
            try:
                child = mutate(kind, parent.pipeline, self.rng, self.grower)
            except OPERATOR_FAILURES:
                continue
            if self.validate_fn(child):
                return Individual(child, origin="fallback", parent_quality=parent.quality, operators=(kind,))
        if not self.validate_fn(parent.pipeline):
            raise ReproductionStallError(f"no valid offspring after {self.retries} attempts and the parent itself is invalid")
        return Individual(parent.pipeline, origin="copy", parent_quality=parent.quality)

    def breed(self, first: Individual, second: Individual, crossover_rate: float, mutation_rate: float) -> List[Individual]:
        parent_quality = max(first.quality, second.quality)
        offspring: List[Individual] = []
        for _ in range(self.retries):
            try:
                children = self._attempt(first, second, crossover_rate, mutation_rate)
            except OPERATOR_FAILURES as exc:
                logger.debug("crossover not applicable: %s", exc)
                continue
            for child, operators in children:
                if len(offspring) < 2 and child is not None and self.validate_fn(child):
                    offspring.append(
                        Individual(child, origin="+".join(operators) or "copy", parent_quality=parent_quality, operators=operators)
                    )
            if len(offspring) >= 2:
                return offspring
        self.stalls += 1
        logger.warning("no valid offspring after %d attempts; falling back to mutated parent copies", self.retries)
        for parent in (first, second)[len(offspring):]:
            offspring.append(self._fallback(parent))
        return offspring

    def reproduce(self, parents: List[Individual], count: int, crossover_rate: float, mutation_rate: float) -> List[Individual]:
        offspring: List[Individual] = []
        position = 0
        while len(offspring) < count:
            first = parents[position % len(parents)]
            second = parents[(position + 1) % len(parents)]
            offspring.extend(self.breed(first, second, crossover_rate, mutation_rate))
            position += 2
        return offspring[:count]


def reproduce(parents: List[Individual], config, grower: PipelineGrower, validate_fn: Callable, rng: np.random.Generator) -> List[Individual]:
    return Reproducer(grower, validate_fn, rng).reproduce(parents, config.offspring_size, config.crossover_rate, config.mutation_rate)
