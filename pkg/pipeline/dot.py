"""
Graphviz DOT rendering of pipelines, optionally colored by node importance.
"""

from typing import Dict, Optional

from pipeline.graph import Pipeline

# importance buckets: (name, fill color)
IMPORTANT = ("important", "palegreen")
NEUTRAL = ("neutral", "lightgray")
HARMFUL = ("harmful", "salmon")
NEUTRAL_BAND = 1e-3


def importance_bucket(value: float):
    if value > NEUTRAL_BAND:
        return IMPORTANT
    if value < -NEUTRAL_BAND:
        return HARMFUL
    return NEUTRAL


def pipeline_to_dot(pipeline: Pipeline, importance: Optional[Dict[int, float]] = None, name: str = "pipeline") -> str:
    lines = [f"digraph {name} {{", "    rankdir=LR;", "    node [shape=box, style=filled, fillcolor=white];"]
    sink = pipeline.final_node_id
    for node in pipeline.nodes:
        label = node.operation_id
        attributes = []
        if importance is not None and node.id in importance:
            bucket, color = importance_bucket(importance[node.id])
            label += f"\\nS={importance[node.id]:.3f}"
            attributes.append(f'fillcolor="{color}"')
            attributes.append(f'class="{bucket}"')
        if node.id == sink:
            attributes.append("peripheries=2")
        attributes.insert(0, f'label="{node.id}: {label}"')
        lines.append(f"    n{node.id} [{', '.join(attributes)}];")
    for node in pipeline.nodes:
        for parent in node.parent_ids:
            lines.append(f"    n{parent} -> n{node.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
