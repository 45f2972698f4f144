"""Connectivity rules and lowering of a NetworkSpec into a primitive-op DAG."""

from __future__ import annotations

import enum
import heapq
import math
from fractions import Fraction
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, NamedTuple

from .config import BlockSpec, ConvSpec, Mode, NetworkSpec, check


class OpKind(str, enum.Enum):
    INPUT = "Input"
    OUTPUT = "Output"
    CONV = "Conv"
    BATCHNORM = "BatchNorm"
    RELU = "Relu"
    CONCAT = "Concat"
    AVGPOOL = "AvgPool"
    MAXPOOL = "MaxPool"
    GLOBALAVGPOOL = "GlobalAvgPool"
    FC = "FullyConnected"


@dataclass(frozen=True)
class PoolSpec:
    kernel: int
    stride: int
    padding: int = 0


@dataclass(frozen=True)
class FCSpec:
    classes: int
    has_bias: bool = True


@dataclass(frozen=True)
class OpNode:
    id: int
    kind: OpKind
    attrs: Any = None
    block_index: int | None = None
    layer_index: int | None = None
    # stem | block | transition | classifier | io
    stage: str = "io"


class Edge(NamedTuple):
    src: int
    dst: int
    slot: int


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ComputeGraph:
    """Immutable DAG of primitive operators.

    ``layer_outputs`` maps ``(block, layer)`` to the node holding that
    layer's feature map (layer 0 is the block input) and ``layer_entries``
    maps ``(block, layer)`` to the node that consumes the layer's gathered
    inputs. Both are bookkeeping for connectivity checks.
    """

    nodes: tuple[OpNode, ...]
    edges: tuple[Edge, ...]
    topo_order: tuple[int, ...]
    name: str = ""
    layer_outputs: dict = field(default_factory=dict, compare=False)
    layer_entries: dict = field(default_factory=dict, compare=False)
    block_modes: tuple[Mode, ...] = ()

    @cached_property
    def inputs_of(self) -> dict[int, list[int]]:
        ins: dict[int, list[tuple[int, int]]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            ins[e.dst].append((e.slot, e.src))
        return {k: [src for _, src in sorted(v)] for k, v in ins.items()}

    @cached_property
    def consumers_of(self) -> dict[int, list[int]]:
        outs: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            outs[e.src].append(e.dst)
        return outs

    @cached_property
    def position(self) -> dict[int, int]:
        return {nid: i for i, nid in enumerate(self.topo_order)}

    def node(self, nid: int) -> OpNode:
        return self.nodes[nid]

    @property
    def input_id(self) -> int:
        return next(n.id for n in self.nodes if n.kind is OpKind.INPUT)

    @property
    def output_id(self) -> int:
        return next(n.id for n in self.nodes if n.kind is OpKind.OUTPUT)


def topological_order(nodes: tuple[OpNode, ...], edges: tuple[Edge, ...]) -> tuple[int, ...]:
    """Kahn's algorithm, smallest id first so the order is deterministic."""
    indeg = {n.id: 0 for n in nodes}
    succ: dict[int, list[int]] = {n.id: [] for n in nodes}
    for e in edges:
        indeg[e.dst] += 1
        succ[e.src].append(e.dst)
    ready = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for nxt in succ[nid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(nodes):
        raise GraphError("graph has a cycle")
    return tuple(order)


def make_graph(nodes, edges, name: str = "", **meta) -> ComputeGraph:
    """Assemble and check a graph from raw nodes and edges."""
    nodes = tuple(sorted(nodes, key=lambda n: n.id))
    edges = tuple(Edge(*e) for e in edges)
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise GraphError("node ids must be dense and start at 0")
    for e in edges:
        if not (0 <= e.src < len(nodes) and 0 <= e.dst < len(nodes)):
            raise GraphError(f"edge {e} references an unknown node")
        if nodes[e.dst].kind is OpKind.INPUT:
            raise GraphError("Input node cannot have predecessors")
        if nodes[e.src].kind is OpKind.OUTPUT:
            raise GraphError("Output node cannot have successors")
    slots: dict[int, list[int]] = {n.id: [] for n in nodes}
    for e in edges:
        slots[e.dst].append(e.slot)
    for nid, s in slots.items():
        if sorted(s) != list(range(len(s))):
            raise GraphError(f"node {nid} has non-contiguous input slots {sorted(s)}")
    order = topological_order(nodes, edges)
    return ComputeGraph(nodes=nodes, edges=edges, topo_order=order, name=name, **meta)


# -- connectivity rules --------------------------------------------------------


def two_adic_valuation(l: int) -> int:
    if l < 1:
        raise ValueError(f"layer index must be >= 1, got {l}")
    return (l & -l).bit_length() - 1


def dense_layer_inputs(l: int) -> list[int]:
    if l < 1:
        raise ValueError(f"layer index must be >= 1, got {l}")
    return list(range(l))


def harmonic_layer_inputs(l: int) -> list[int]:
    """Layers feeding layer ``l``: every ``l - 2**n`` with ``2**n`` dividing ``l``.

    Returned in ascending order, which is also the concatenation order.
    """
    nu = two_adic_valuation(l)
    return sorted(l - (1 << n) for n in range(nu + 1))


def harmonic_layer_width(k: int, m: float, l: int) -> int:
    """``floor(k * m**n)`` with ``n`` the 2-adic valuation of ``l``.

    ``m`` is taken at its decimal value (1.7 means 17/10) so exact products
    such as 40 * 1.7 = 68 are not floored to 67 by binary rounding.
    """
    return math.floor(k * Fraction(repr(float(m))) ** two_adic_valuation(l))


def block_output_layers(mode: Mode, L: int) -> list[int]:
    if L < 1:
        raise ValueError(f"block needs at least one layer, got {L}")
    if mode is Mode.DENSE:
        return list(range(L + 1))
    if mode is Mode.HARMONIC:
        return sorted({0, L} | set(range(1, L + 1, 2)))
    raise ValueError(f"mode must be resolved, got {mode}")


def resolve_modes(spec: NetworkSpec) -> list[Mode]:
    modes = []
    for blk, c_in in zip(spec.blocks, spec.channel_list):
        if blk.mode is Mode.AUTO:
            modes.append(Mode.HARMONIC if c_in >= spec.threshold else Mode.DENSE)
        else:
            modes.append(blk.mode)
    return modes


def layer_widths(mode: Mode, block: BlockSpec) -> list[int]:
    """Output channels of layers 1..L of a block."""
    L, k = block.num_layers, block.growth_rate
    if mode is Mode.DENSE:
        return [k] * L
    return [harmonic_layer_width(k, block.multiplier, l) for l in range(1, L + 1)]


# -- graph construction --------------------------------------------------------


class GraphBuilder:
    def __init__(self, name: str = ""):
        self.name = name
        self.nodes: list[OpNode] = []
        self.edges: list[Edge] = []
        self.layer_outputs: dict[tuple[int, int], int] = {}
        self.layer_entries: dict[tuple[int, int], int] = {}
        self.block_modes: list[Mode] = []

    def add(self, kind: OpKind, inputs=(), attrs=None, **tags) -> int:
        nid = len(self.nodes)
        self.nodes.append(OpNode(nid, kind, attrs, **tags))
        for slot, src in enumerate(inputs):
            self.edges.append(Edge(src, nid, slot))
        return nid

    def conv(self, x: int, conv: ConvSpec, **tags) -> int:
        return self.add(OpKind.CONV, [x], conv, **tags)

    def conv_bn_relu(self, x: int, conv: ConvSpec, **tags) -> int:
        x = self.conv(x, conv, **tags)
        x = self.add(OpKind.BATCHNORM, [x], **tags)
        return self.add(OpKind.RELU, [x], **tags)

    def gather(self, srcs: list[int], **tags) -> int:
        if len(srcs) == 1:
            return srcs[0]
        return self.add(OpKind.CONCAT, srcs, **tags)

    def block(
        self,
        x0: int,
        b: int,
        mode: Mode,
        widths: list[int],
        growth: int,
        bottleneck: bool,
        keep_input: bool = True,
    ) -> int:
        """Emit one block starting from value ``x0``; returns the block output node."""
        L = len(widths)
        outs = {0: x0}
        self.layer_outputs[(b, 0)] = x0
        rule = dense_layer_inputs if mode is Mode.DENSE else harmonic_layer_inputs
        for l in range(1, L + 1):
            tags = dict(block_index=b, layer_index=l, stage="block")
            start = len(self.nodes)
            x = self.gather([outs[j] for j in rule(l)], **tags)
            if mode is Mode.DENSE:
                if bottleneck:
                    x = self.add(OpKind.BATCHNORM, [x], **tags)
                    x = self.add(OpKind.RELU, [x], **tags)
                    x = self.conv(x, ConvSpec(4 * growth, 1), **tags)
                x = self.add(OpKind.BATCHNORM, [x], **tags)
                x = self.add(OpKind.RELU, [x], **tags)
                x = self.conv(x, ConvSpec(widths[l - 1], 3, padding=1), **tags)
            else:
                x = self.conv_bn_relu(x, ConvSpec(widths[l - 1], 3, padding=1), **tags)
            self.layer_entries[(b, l)] = start
            self.layer_outputs[(b, l)] = x
            outs[l] = x
        picked = [j for j in block_output_layers(mode, L) if keep_input or j > 0]
        return self.gather([outs[j] for j in picked], block_index=b, stage="block")

    def finish(self) -> ComputeGraph:
        return make_graph(
            self.nodes,
            self.edges,
            name=self.name,
            layer_outputs=dict(self.layer_outputs),
            layer_entries=dict(self.layer_entries),
            block_modes=tuple(self.block_modes),
        )


def build_graph(spec: NetworkSpec, keep_harmonic_input: bool = True, transition_bn: bool = True) -> ComputeGraph:
    """Lower ``spec`` to primitive ops.

    The two flags exist for calibration studies only: dropping the block
    input from harmonic block outputs, and transitions without BN+ReLU.
    """
    check(spec)
    modes = resolve_modes(spec)
    g = GraphBuilder(spec.name)
    g.block_modes = modes
    x = g.add(OpKind.INPUT)

    for conv in spec.stem.convs:
        x = g.conv_bn_relu(x, conv, stage="stem")
    stem = spec.stem
    pool_kind = OpKind.MAXPOOL if stem.pool_kind == "max" else OpKind.AVGPOOL
    x = g.add(pool_kind, [x], PoolSpec(stem.pool_kernel, stem.pool_stride, stem.pool_padding), stage="stem")

    last = len(spec.blocks) - 1
    for b, (blk, mode) in enumerate(zip(spec.blocks, modes)):
        keep = keep_harmonic_input or mode is Mode.DENSE
        x = g.block(x, b, mode, layer_widths(mode, blk), blk.growth_rate, blk.use_bottleneck, keep)
        if b == last:
            break
        tags = dict(block_index=b, stage="transition")
        if transition_bn:
            x = g.conv_bn_relu(x, ConvSpec(spec.channel_list[b + 1], 1), **tags)
        else:
            x = g.conv(x, ConvSpec(spec.channel_list[b + 1], 1), **tags)
        if blk.downsample_after:
            x = g.add(OpKind.AVGPOOL, [x], PoolSpec(2, 2, 0), **tags)

    x = g.add(OpKind.GLOBALAVGPOOL, [x], stage="classifier")
    x = g.add(OpKind.FC, [x], FCSpec(spec.classifier_classes), stage="classifier")
    g.add(OpKind.OUTPUT, [x])
    return g.finish()


def build_block_graph(
    mode: Mode,
    widths: list[int],
    in_channels: int,
    growth: int | None = None,
    bottleneck: bool = False,
) -> ComputeGraph:
    """A lone block between an Input and an Output node (analysis fixture)."""
    g = GraphBuilder(f"{mode.value}-block")
    g.block_modes = [mode]
    x = g.add(OpKind.INPUT)
    x = g.block(x, 0, mode, list(widths), growth or max(widths), bottleneck)
    g.add(OpKind.OUTPUT, [x])
    return g.finish()


def block_edge_count(graph: ComputeGraph, b: int) -> int:
    """Layer-to-layer input edges of block ``b`` (block input counts as layer 0)."""
    outputs = {nid for (bb, _), nid in graph.layer_outputs.items() if bb == b}
    entries = {nid for (bb, _), nid in graph.layer_entries.items() if bb == b}
    return sum(1 for e in graph.edges if e.dst in entries and e.src in outputs)
