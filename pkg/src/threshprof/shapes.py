"""Shape propagation over a ComputeGraph."""

from __future__ import annotations

from typing import NamedTuple

from .topology import ComputeGraph, Edge, OpKind


class TensorShape(NamedTuple):
    n: int
    c: int
    h: int
    w: int

    @property
    def elements(self) -> int:
        return self.n * self.c * self.h * self.w

    @property
    def sample_elements(self) -> int:
        """Elements of a single batch item."""
        return self.c * self.h * self.w


class ShapeError(ValueError):
    pass


class ShapeUnderflowError(ShapeError):
    pass


class ShapeMismatchError(ShapeError):
    pass


def conv_out_dim(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ShapeUnderflowError(
            f"spatial size {size} collapses to {out} (kernel={kernel}, stride={stride}, padding={padding})"
        )
    return out


def node_shapes(graph: ComputeGraph, input: TensorShape) -> dict[int, TensorShape]:
    """Output shape of every node. The Output node reports its input's shape."""
    if min(input) < 1:
        raise ShapeError(f"input shape must be positive, got {tuple(input)}")
    input = TensorShape(*input)
    out: dict[int, TensorShape] = {}
    for nid in graph.topo_order:
        node = graph.nodes[nid]
        ins = [out[src] for src in graph.inputs_of[nid]]
        kind = node.kind
        if kind is OpKind.INPUT:
            s = input
        elif kind is OpKind.CONCAT:
            first = ins[0]
            for slot, other in enumerate(ins[1:], start=1):
                if (other.n, other.h, other.w) != (first.n, first.h, first.w):
                    srcs = graph.inputs_of[nid]
                    raise ShapeMismatchError(
                        f"concat node {nid}: edge {srcs[0]}->{nid} has {tuple(first)} "
                        f"but edge {srcs[slot]}->{nid} has {tuple(other)}"
                    )
            s = TensorShape(first.n, sum(t.c for t in ins), first.h, first.w)
        else:
            (x,) = ins
            if kind is OpKind.CONV:
                a = node.attrs
                s = TensorShape(
                    x.n,
                    a.out_channels,
                    conv_out_dim(x.h, a.kernel, a.stride, a.padding),
                    conv_out_dim(x.w, a.kernel, a.stride, a.padding),
                )
            elif kind in (OpKind.AVGPOOL, OpKind.MAXPOOL):
                a = node.attrs
                s = TensorShape(
                    x.n,
                    x.c,
                    conv_out_dim(x.h, a.kernel, a.stride, a.padding),
                    conv_out_dim(x.w, a.kernel, a.stride, a.padding),
                )
            elif kind is OpKind.GLOBALAVGPOOL:
                s = TensorShape(x.n, x.c, 1, 1)
            elif kind is OpKind.FC:
                s = TensorShape(x.n, node.attrs.classes, 1, 1)
            else:  # BatchNorm, Relu, Output
                s = x
        out[nid] = s
    return out


def propagate(graph: ComputeGraph, input: TensorShape) -> dict[Edge, TensorShape]:
    shapes = node_shapes(graph, input)
    return {e: shapes[e.src] for e in graph.edges}


def block_input_shapes(graph: ComputeGraph, shapes: dict[int, TensorShape]) -> list[TensorShape]:
    """Shape entering each block (its layer-0 value), in block order."""
    firsts = sorted((b, nid) for (b, l), nid in graph.layer_outputs.items() if l == 0)
    return [shapes[nid] for _, nid in firsts]
