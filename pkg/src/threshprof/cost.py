"""Parameter, multiply-accumulate and depth accounting.

Naming follows the comparison table this tool reproduces: its "FLOPs"
column is the plain multiply-accumulate count and its "MACs" column is
twice that. ``reported_flops`` and ``reported_macs`` keep that inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

from .shapes import TensorShape, node_shapes
from .topology import ComputeGraph, OpKind, OpNode


@dataclass(frozen=True)
class NodeCost:
    params: int
    macc: int


@dataclass(frozen=True)
class CostReport:
    per_node: dict[int, NodeCost]
    total_params: int
    total_macc: int
    depth: int

    @property
    def reported_flops(self) -> int:
        return self.total_macc

    @property
    def reported_macs(self) -> int:
        return 2 * self.total_macc


def op_params(node: OpNode, in_shape: TensorShape | None) -> int:
    kind = node.kind
    if kind is OpKind.CONV:
        if in_shape is None:
            raise RuntimeError(f"conv node {node.id} is unshaped")
        a = node.attrs
        return in_shape.c * a.out_channels * a.kernel * a.kernel + (a.out_channels if a.has_bias else 0)
    if kind is OpKind.BATCHNORM:
        if in_shape is None:
            raise RuntimeError(f"batch-norm node {node.id} is unshaped")
        return 2 * in_shape.c
    if kind is OpKind.FC:
        if in_shape is None:
            raise RuntimeError(f"fully-connected node {node.id} is unshaped")
        a = node.attrs
        return in_shape.sample_elements * a.classes + (a.classes if a.has_bias else 0)
    return 0


def op_macc(node: OpNode, in_shape: TensorShape | None, out_shape: TensorShape | None) -> int:
    """Per-sample multiply-accumulates of one node (batch is ignored)."""
    kind = node.kind
    if kind not in (OpKind.CONV, OpKind.FC, OpKind.BATCHNORM):
        return 0
    if in_shape is None or out_shape is None:
        raise RuntimeError(f"node {node.id} is unshaped")
    if kind is OpKind.CONV:
        k = node.attrs.kernel
        return in_shape.c * out_shape.c * k * k * out_shape.h * out_shape.w
    if kind is OpKind.FC:
        return in_shape.sample_elements * node.attrs.classes
    return in_shape.sample_elements


def depth(graph: ComputeGraph) -> int:
    return sum(1 for n in graph.nodes if n.kind in (OpKind.CONV, OpKind.FC))


def network_cost(graph: ComputeGraph, input: TensorShape, shapes: dict[int, TensorShape] | None = None) -> CostReport:
    if shapes is None:
        shapes = node_shapes(graph, input)
    per_node = {}
    for node in graph.nodes:
        srcs = graph.inputs_of[node.id]
        in_shape = shapes[srcs[0]] if srcs else None
        per_node[node.id] = NodeCost(op_params(node, in_shape), op_macc(node, in_shape, shapes[node.id]))
    return CostReport(
        per_node=per_node,
        total_params=sum(c.params for c in per_node.values()),
        total_macc=sum(c.macc for c in per_node.values()),
        depth=depth(graph),
    )


def stage_totals(graph: ComputeGraph, report: CostReport) -> dict[str, NodeCost]:
    """Cost grouped by stem, each block, each transition and the classifier."""
    groups: dict[str, list[NodeCost]] = {}
    for node in graph.nodes:
        key = node.stage
        if node.stage in ("block", "transition"):
            key = f"{node.stage}{node.block_index + 1}"
        groups.setdefault(key, []).append(report.per_node[node.id])
    return {
        k: NodeCost(sum(c.params for c in v), sum(c.macc for c in v)) for k, v in groups.items()
    }
