"""Deterministic reference execution of a ComputeGraph on fp32 tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..memplan import Schedule, UseAfterFreeError, check_schedule
from ..shapes import TensorShape, node_shapes
from ..topology import ComputeGraph, OpKind
from .kernels import get_kernels
from .rng import INPUT_STREAM, MASK64, symmetric_uniform

BN_EPS = 1e-5

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


class ExecutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvWeights:
    kernel: np.ndarray  # (c_out, c_in, k, k)
    bias: np.ndarray | None = None


@dataclass(frozen=True)
class BNWeights:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray


@dataclass(frozen=True)
class FCWeights:
    matrix: np.ndarray  # (classes, features)
    bias: np.ndarray | None = None


@dataclass
class WeightStore:
    seed: int
    by_node: dict[int, object] = field(default_factory=dict)

    def __getitem__(self, nid: int):
        return self.by_node[nid]

    def num_params(self, nid: int) -> int:
        w = self.by_node.get(nid)
        if w is None:
            return 0
        if isinstance(w, BNWeights):
            return w.gamma.size + w.beta.size
        if isinstance(w, ConvWeights):
            return w.kernel.size + (0 if w.bias is None else w.bias.size)
        return w.matrix.size + (0 if w.bias is None else w.bias.size)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def init_weights(graph: ComputeGraph, seed: int, input: TensorShape) -> WeightStore:
    """Seed every parametrised node from its own splitmix64 stream.

    The stream for node ``i`` starts at ``seed ^ i``; values are
    ``(2u - 1) / sqrt(fan_in)`` laid out as (c_out, c_in, kh, kw).
    """
    shapes = node_shapes(graph, input)
    store = WeightStore(seed)
    for node in graph.nodes:
        srcs = graph.inputs_of[node.id]
        if not srcs:
            continue
        c_in = shapes[srcs[0]].c
        stream = (seed ^ node.id) & MASK64
        if node.kind is OpKind.CONV:
            a = node.attrs
            fan_in = c_in * a.kernel * a.kernel
            count = a.out_channels * fan_in
            vals = symmetric_uniform(stream, count + (a.out_channels if a.has_bias else 0), fan_in**-0.5)
            kernel = vals[:count].reshape(a.out_channels, c_in, a.kernel, a.kernel)
            bias = vals[count:] if a.has_bias else None
            store.by_node[node.id] = ConvWeights(_readonly(kernel), bias if bias is None else _readonly(bias))
        elif node.kind is OpKind.BATCHNORM:
            c = shapes[node.id].c
            store.by_node[node.id] = BNWeights(
                gamma=_readonly(np.ones(c, np.float32)),
                beta=_readonly(np.zeros(c, np.float32)),
                mean=_readonly(np.zeros(c, np.float32)),
                var=_readonly(np.ones(c, np.float32)),
            )
        elif node.kind is OpKind.FC:
            a = node.attrs
            fan_in = shapes[srcs[0]].sample_elements
            matrix = symmetric_uniform(stream, a.classes * fan_in, fan_in**-0.5).reshape(a.classes, fan_in)
            bias = np.zeros(a.classes, np.float32) if a.has_bias else None
            store.by_node[node.id] = FCWeights(_readonly(matrix), bias if bias is None else _readonly(bias))
    return store


def random_input(shape: TensorShape, seed: int) -> np.ndarray:
    """Input tensor in [-1, 1) from a stream disjoint from the weight streams."""
    shape = TensorShape(*shape)
    return symmetric_uniform((seed ^ INPUT_STREAM) & MASK64, shape.elements).reshape(shape)


def _pad(x: np.ndarray, p: int, value: float = 0.0) -> np.ndarray:
    if p == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=np.float32(value))


class Executor:
    """Runs nodes one at a time; ``mults`` records the multiplies each node performed."""

    def __init__(self, graph: ComputeGraph, weights: WeightStore, backend: str | None = None):
        self.graph = graph
        self.weights = weights
        self.k = get_kernels(backend)
        self.mults: dict[int, int] = {}

    def run_node(self, nid: int, inputs: list[np.ndarray], x0: np.ndarray | None = None) -> np.ndarray:
        node = self.graph.nodes[nid]
        kind = node.kind
        k = self.k
        mults = 0
        if kind is OpKind.INPUT:
            y = x0
        elif kind is OpKind.OUTPUT:
            y = inputs[0]
        elif kind is OpKind.CONCAT:
            y = np.concatenate(inputs, axis=1)
        else:
            (x,) = inputs
            if kind is OpKind.CONV:
                a = node.attrs
                w = self.weights[nid]
                if x.shape[1] != w.kernel.shape[1]:
                    raise ExecutionError(f"conv node {nid}: expected {w.kernel.shape[1]} channels, got {x.shape[1]}")
                out_h = (x.shape[2] + 2 * a.padding - a.kernel) // a.stride + 1
                out_w = (x.shape[3] + 2 * a.padding - a.kernel) // a.stride + 1
                y, mults = k.conv2d(_pad(x, a.padding), w.kernel, w.bias, a.stride, out_h, out_w)
            elif kind is OpKind.BATCHNORM:
                w = self.weights[nid]
                y, mults = k.batchnorm(x, w.gamma, w.beta, w.mean, w.var, BN_EPS)
            elif kind is OpKind.RELU:
                y = k.relu(x)
            elif kind in (OpKind.AVGPOOL, OpKind.MAXPOOL):
                a = node.attrs
                out_h = (x.shape[2] + 2 * a.padding - a.kernel) // a.stride + 1
                out_w = (x.shape[3] + 2 * a.padding - a.kernel) // a.stride + 1
                if kind is OpKind.MAXPOOL:
                    y = k.maxpool(_pad(x, a.padding, -np.inf), a.kernel, a.stride, out_h, out_w)
                else:
                    y = k.avgpool(_pad(x, a.padding), a.kernel, a.stride, out_h, out_w)
            elif kind is OpKind.GLOBALAVGPOOL:
                y = k.global_avgpool(np.ascontiguousarray(x))
            elif kind is OpKind.FC:
                w = self.weights[nid]
                flat = x.reshape(x.shape[0], -1)
                y, mults = k.linear(flat, w.matrix, w.bias)
                y = y.reshape(x.shape[0], -1, 1, 1)
            else:
                raise ExecutionError(f"unsupported op {kind}")
        self.mults[nid] = mults
        return y


def _check_input(graph: ComputeGraph, weights: WeightStore, x: np.ndarray) -> None:
    if x.dtype != np.float32 or x.ndim != 4:
        raise ExecutionError(f"input must be a 4-d float32 array, got {x.dtype} with shape {x.shape}")
    first = graph.consumers_of[graph.input_id]
    for nid in first:
        w = weights.by_node.get(nid)
        if isinstance(w, ConvWeights) and w.kernel.shape[1] != x.shape[1]:
            raise ExecutionError(f"input has {x.shape[1]} channels, graph expects {w.kernel.shape[1]}")


def exec_naive(
    graph: ComputeGraph,
    weights: WeightStore,
    x: np.ndarray,
    backend: str | None = None,
    keep: dict[int, np.ndarray] | None = None,
    mults: dict[int, int] | None = None,
) -> np.ndarray:
    """Run every node in topological order, retaining all intermediates.

    Pass dicts as ``keep``/``mults`` to receive every node's output and its
    instrumented multiply count.
    """
    _check_input(graph, weights, x)
    ex = Executor(graph, weights, backend)
    values: dict[int, np.ndarray] = {} if keep is None else keep
    for nid in graph.topo_order:
        ins = [values[src] for src in graph.inputs_of[nid]]
        values[nid] = ex.run_node(nid, ins, x)
    if mults is not None:
        mults.update(ex.mults)
    return values[graph.output_id]


def exec_scheduled(
    graph: ComputeGraph,
    sched: Schedule,
    weights: WeightStore,
    x: np.ndarray,
    backend: str | None = None,
    validate: bool = True,
) -> np.ndarray:
    """Same arithmetic as :func:`exec_naive` but releases buffers per ``sched``.

    Reading a released buffer raises :class:`UseAfterFreeError`.
    """
    if validate:
        check_schedule(graph, sched)
    _check_input(graph, weights, x)
    ex = Executor(graph, weights, backend)
    live: dict[int, np.ndarray] = {}
    freed: set[int] = set()
    result = None
    for step in sched.steps:
        ins = []
        for src in graph.inputs_of[step.node]:
            if src not in live:
                state = "freed" if src in freed else "never produced"
                raise UseAfterFreeError(f"node {step.node} reads value {src} which is {state}")
            ins.append(live[src])
        y = ex.run_node(step.node, ins, x)
        if step.node == graph.output_id:
            result = y
        else:
            live[step.node] = y
        for v in step.free_after:
            if v not in live:
                raise UseAfterFreeError(f"value {v} released while not resident")
            del live[v]
            freed.add(v)
    if result is None:
        raise ExecutionError("schedule never reached the Output node")
    return result


def checksum(t: np.ndarray) -> str:
    """FNV-1a 64 over the little-endian fp32 bytes, row-major."""
    h = FNV_OFFSET
    for byte in np.ascontiguousarray(t, dtype="<f4").tobytes():
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return f"{h:016x}"
