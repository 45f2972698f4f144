"""JSON and DOT serialisation of ComputeGraphs."""

from __future__ import annotations

import json

from .config import ConvSpec, Mode
from .topology import ComputeGraph, FCSpec, OpKind, OpNode, PoolSpec, make_graph

GRAPH_SCHEMA_ID = "threshprof.graph/1"


class GraphFormatError(ValueError):
    pass


def _attrs_to_dict(attrs) -> dict | None:
    if attrs is None:
        return None
    if isinstance(attrs, ConvSpec):
        return {
            "type": "conv",
            "out_channels": attrs.out_channels,
            "kernel": attrs.kernel,
            "stride": attrs.stride,
            "padding": attrs.padding,
            "has_bias": attrs.has_bias,
        }
    if isinstance(attrs, PoolSpec):
        return {"type": "pool", "kernel": attrs.kernel, "stride": attrs.stride, "padding": attrs.padding}
    if isinstance(attrs, FCSpec):
        return {"type": "fc", "classes": attrs.classes, "has_bias": attrs.has_bias}
    raise TypeError(f"cannot serialise attrs {attrs!r}")


def _attrs_from_dict(d: dict | None):
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("type")
    return {"conv": ConvSpec, "pool": PoolSpec, "fc": FCSpec}[kind](**d)


def graph_to_dict(graph: ComputeGraph) -> dict:
    return {
        "schema": GRAPH_SCHEMA_ID,
        "name": graph.name,
        "block_modes": [m.value for m in graph.block_modes],
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "attrs": _attrs_to_dict(n.attrs),
                "block_index": n.block_index,
                "layer_index": n.layer_index,
                "stage": n.stage,
            }
            for n in graph.nodes
        ],
        "edges": [[e.src, e.dst, e.slot] for e in graph.edges],
        "layer_outputs": [[b, l, nid] for (b, l), nid in sorted(graph.layer_outputs.items())],
        "layer_entries": [[b, l, nid] for (b, l), nid in sorted(graph.layer_entries.items())],
    }


def graph_to_json(graph: ComputeGraph) -> str:
    return json.dumps(graph_to_dict(graph), indent=1) + "\n"


def graph_from_dict(doc: dict) -> ComputeGraph:
    if doc.get("schema") != GRAPH_SCHEMA_ID:
        raise GraphFormatError(f"expected schema {GRAPH_SCHEMA_ID!r}, got {doc.get('schema')!r}")
    try:
        nodes = [
            OpNode(
                id=n["id"],
                kind=OpKind(n["kind"]),
                attrs=_attrs_from_dict(n["attrs"]),
                block_index=n["block_index"],
                layer_index=n["layer_index"],
                stage=n["stage"],
            )
            for n in doc["nodes"]
        ]
        return make_graph(
            nodes,
            [tuple(e) for e in doc["edges"]],
            name=doc["name"],
            layer_outputs={(b, l): nid for b, l, nid in doc["layer_outputs"]},
            layer_entries={(b, l): nid for b, l, nid in doc["layer_entries"]},
            block_modes=tuple(Mode(m) for m in doc["block_modes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"malformed graph document: {exc}") from exc


def load_graph(text: str) -> ComputeGraph:
    return graph_from_dict(json.loads(text))


def _label(n: OpNode) -> str:
    a = n.attrs
    if isinstance(a, ConvSpec):
        extra = f"\\n{a.kernel}x{a.kernel}/{a.stride} -> {a.out_channels}"
    elif isinstance(a, PoolSpec):
        extra = f"\\n{a.kernel}x{a.kernel}/{a.stride}"
    elif isinstance(a, FCSpec):
        extra = f"\\n{a.classes} classes"
    else:
        extra = ""
    where = ""
    if n.block_index is not None:
        where = f"\\nb{n.block_index}" + (f" l{n.layer_index}" if n.layer_index is not None else "")
    return f"{n.kind.value}{extra}{where}"


def graph_to_dot(graph: ComputeGraph) -> str:
    """Graphviz source, nodes and edges in id order so output is byte-stable."""
    lines = [f'digraph "{graph.name or "graph"}" {{', "  rankdir=TB;", "  node [shape=box, fontsize=10];"]
    for n in graph.nodes:
        lines.append(f'  n{n.id} [label="{_label(n)}"];')
    for e in sorted(graph.edges):
        lines.append(f'  n{e.src} -> n{e.dst} [label="{e.slot}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
