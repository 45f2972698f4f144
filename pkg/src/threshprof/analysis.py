"""End-to-end analysis of a spec and the machine-readable document it produces."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from . import TOOL_VERSION
from .config import NetworkSpec, spec_to_dict
from .cost import CostReport, network_cost
from .memplan import MemReport, check_schedule, schedule, traffic
from .shapes import ShapeUnderflowError, TensorShape, block_input_shapes, node_shapes
from .topology import ComputeGraph, build_graph

ANALYSIS_SCHEMA_ID = "threshprof.analysis/1"
MIN_INPUT = 32


@dataclass(frozen=True)
class BlockRow:
    index: int
    mode: str
    layers: int
    growth_rate: int
    in_channels: int
    out_channels: int
    height: int
    width: int


@dataclass(frozen=True)
class AnalysisDocument:
    name: str
    spec: dict
    input_shape: tuple[int, int, int, int]
    modes: tuple[str, ...]
    blocks: tuple[BlockRow, ...]
    total_params: int
    total_macc: int
    reported_macs: int
    reported_flops: int
    depth: int
    read_bytes: int
    write_bytes: int
    memrw_mb: float
    memrw_mb_zero_copy: float
    peak_bytes: int
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["input_shape"] = list(self.input_shape)
        d["modes"] = list(self.modes)
        d["blocks"] = [dataclasses.asdict(b) for b in self.blocks]
        return {"schema": ANALYSIS_SCHEMA_ID, **d}

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisDocument:
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != ANALYSIS_SCHEMA_ID:
            raise ValueError(f"expected schema {ANALYSIS_SCHEMA_ID!r}, got {schema!r}")
        d["input_shape"] = tuple(d["input_shape"])
        d["modes"] = tuple(d["modes"])
        d["blocks"] = tuple(BlockRow(**b) for b in d["blocks"])
        return cls(**d)


@dataclass(frozen=True)
class Analysis:
    spec: NetworkSpec
    graph: ComputeGraph
    shapes: dict
    cost: CostReport
    mem: MemReport
    mem_zero_copy: MemReport

    def document(self) -> AnalysisDocument:
        rows = []
        ins = block_input_shapes(self.graph, self.shapes)
        outs = _block_output_shapes(self.graph, self.shapes)
        for i, (blk, mode, s_in, s_out) in enumerate(zip(self.spec.blocks, self.graph.block_modes, ins, outs)):
            rows.append(BlockRow(i + 1, mode.value, blk.num_layers, blk.growth_rate, s_in.c, s_out.c, s_in.h, s_in.w))
        inp = self.shapes[self.graph.input_id]
        return AnalysisDocument(
            name=self.spec.name,
            spec=spec_to_dict(self.spec),
            input_shape=tuple(inp),
            modes=tuple(m.value for m in self.graph.block_modes),
            blocks=tuple(rows),
            total_params=self.cost.total_params,
            total_macc=self.cost.total_macc,
            reported_macs=self.cost.reported_macs,
            reported_flops=self.cost.reported_flops,
            depth=self.cost.depth,
            read_bytes=self.mem.total_read_bytes,
            write_bytes=self.mem.total_write_bytes,
            memrw_mb=self.mem.memrw_mb,
            memrw_mb_zero_copy=self.mem_zero_copy.memrw_mb,
            peak_bytes=self.mem.peak_bytes,
        )


def _block_output_shapes(graph: ComputeGraph, shapes: dict) -> list[TensorShape]:
    # The block output concat is the only block-stage node without a layer index.
    out = {}
    for n in graph.nodes:
        if n.stage == "block" and n.layer_index is None:
            out[n.block_index] = shapes[n.id]
    return [out[b] for b in sorted(out)]


def with_classes(spec: NetworkSpec, classes: int | None) -> NetworkSpec:
    if classes is None or classes == spec.classifier_classes:
        return spec
    return dataclasses.replace(spec, classifier_classes=classes)


def check_input_size(input_size: int) -> None:
    if input_size < MIN_INPUT:
        raise ShapeUnderflowError(
            f"input size {input_size} is below {MIN_INPUT}; five 2x downsamplings need at least {MIN_INPUT}"
        )


def analyze(spec: NetworkSpec, input_size: int = 224, classes: int | None = None) -> Analysis:
    """Build, shape, cost and memory-plan ``spec`` for a square RGB input."""
    check_input_size(input_size)
    spec = with_classes(spec, classes)
    graph = build_graph(spec)
    shapes = node_shapes(graph, TensorShape(1, 3, input_size, input_size))
    cost = network_cost(graph, None, shapes)
    sched = schedule(graph)
    check_schedule(graph, sched)
    mem = traffic(graph, shapes, cost, sched=sched)
    mem_zc = traffic(graph, shapes, cost, zero_copy_concat=True, sched=sched)
    return Analysis(spec, graph, shapes, cost, mem, mem_zc)
