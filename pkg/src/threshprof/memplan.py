"""Liveness, free schedules, memory traffic and peak resident bytes.

A *value* here is the feature map produced by a node; it is identified by
the producer's node id and is shared by every out-edge of that node.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cost import CostReport
from .shapes import TensorShape
from .topology import ComputeGraph, OpKind

BYTES_PER_ELEMENT = 4


class ScheduleError(RuntimeError):
    """A schedule frees a value too early, twice, or never."""


class UseAfterFreeError(ScheduleError):
    pass


@dataclass(frozen=True)
class Step:
    node: int
    free_after: frozenset[int]


@dataclass(frozen=True)
class Schedule:
    steps: tuple[Step, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class NodeTraffic:
    read_bytes: int
    write_bytes: int


@dataclass(frozen=True)
class MemReport:
    per_node: dict[int, NodeTraffic]
    total_read_bytes: int
    total_write_bytes: int
    peak_bytes: int
    zero_copy_concat: bool = False

    @property
    def memrw_mb(self) -> float:
        return (self.total_read_bytes + self.total_write_bytes) / 1e6


def liveness(graph: ComputeGraph) -> dict[int, int]:
    """Map each consumed value to the topo position of its last consumer."""
    pos = graph.position
    last: dict[int, int] = {}
    for e in graph.edges:
        p = pos[e.dst]
        if p > last.get(e.src, -1):
            last[e.src] = p
    return last


def schedule(graph: ComputeGraph) -> Schedule:
    frees: dict[int, set[int]] = {}
    for value, p in liveness(graph).items():
        frees.setdefault(p, set()).add(value)
    return Schedule(tuple(Step(nid, frozenset(frees.get(i, ()))) for i, nid in enumerate(graph.topo_order)))


def check_schedule(graph: ComputeGraph, sched: Schedule) -> None:
    """Raise :class:`ScheduleError` unless ``sched`` is safe for ``graph``."""
    if tuple(s.node for s in sched.steps) != graph.topo_order:
        raise ScheduleError("schedule order differs from the graph's topological order")
    last = liveness(graph)
    freed_at: dict[int, int] = {}
    for i, step in enumerate(sched.steps):
        for v in step.free_after:
            if v in freed_at:
                raise ScheduleError(f"value {v} freed twice (steps {freed_at[v]} and {i})")
            if v not in last:
                raise ScheduleError(f"value {v} has no consumers and cannot be freed")
            if i < last[v]:
                raise ScheduleError(f"value {v} freed at step {i} before its last use at step {last[v]}")
            freed_at[v] = i
    missing = set(last) - set(freed_at)
    if missing:
        raise ScheduleError(f"values never freed: {sorted(missing)}")


def _out_bytes(graph: ComputeGraph, shapes: dict[int, TensorShape], nid: int) -> int:
    if graph.nodes[nid].kind is OpKind.OUTPUT:
        return 0
    return BYTES_PER_ELEMENT * shapes[nid].sample_elements


def replay_peak(graph: ComputeGraph, shapes: dict[int, TensorShape], sched: Schedule) -> int:
    """Peak resident bytes when allocating outputs per step and freeing per ``free_after``.

    Raises :class:`UseAfterFreeError` if a step reads a value that was
    already released.
    """
    live: dict[int, int] = {}
    freed: set[int] = set()
    current = peak = 0
    for step in sched.steps:
        for src in graph.inputs_of[step.node]:
            if src not in live:
                state = "freed" if src in freed else "never produced"
                raise UseAfterFreeError(f"node {step.node} reads value {src} which is {state}")
        size = _out_bytes(graph, shapes, step.node)
        live[step.node] = size
        current += size
        peak = max(peak, current)
        for v in step.free_after:
            if v not in live:
                raise UseAfterFreeError(f"value {v} freed while not resident")
            current -= live.pop(v)
            freed.add(v)
    return peak


def traffic(
    graph: ComputeGraph,
    shapes: dict[int, TensorShape],
    costs: CostReport,
    zero_copy_concat: bool = False,
    sched: Schedule | None = None,
) -> MemReport:
    """Read/write bytes per node (batch 1, fp32) plus peak resident bytes.

    reads = inputs + weights, writes = outputs. With ``zero_copy_concat``
    a Concat is treated as a view and contributes no traffic; the peak is
    unaffected.
    """
    per_node = {}
    total_r = total_w = 0
    for nid in graph.topo_order:
        node = graph.nodes[nid]
        if zero_copy_concat and node.kind is OpKind.CONCAT:
            r = w = 0
        else:
            in_elems = sum(shapes[src].sample_elements for src in graph.inputs_of[nid])
            r = BYTES_PER_ELEMENT * (in_elems + costs.per_node[nid].params)
            w = _out_bytes(graph, shapes, nid)
        per_node[nid] = NodeTraffic(r, w)
        total_r += r
        total_w += w
    if sched is None:
        sched = schedule(graph)
    return MemReport(
        per_node=per_node,
        total_read_bytes=total_r,
        total_write_bytes=total_w,
        peak_bytes=replay_peak(graph, shapes, sched),
        zero_copy_concat=zero_copy_concat,
    )
