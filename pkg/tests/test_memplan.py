import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threshprof.config import Mode, preset
from threshprof.cost import network_cost
from threshprof.memplan import (
    Schedule,
    ScheduleError,
    Step,
    UseAfterFreeError,
    check_schedule,
    liveness,
    replay_peak,
    schedule,
    traffic,
)
from threshprof.shapes import TensorShape, node_shapes
from threshprof.topology import OpKind, build_block_graph, build_graph, harmonic_layer_width

from .conftest import analyze_cached, random_runnable_specs
from .helpers import chain, op_zoo, single_conv


def report(graph, shape, **kw):
    shapes = node_shapes(graph, shape)
    return shapes, traffic(graph, shapes, network_cost(graph, None, shapes), **kw)


def test_chain_liveness_and_schedule():
    g = chain(OpKind.RELU)
    assert liveness(g) == {0: 1, 1: 2}
    s = schedule(g)
    assert [st.node for st in s.steps] == [0, 1, 2]
    assert [set(st.free_after) for st in s.steps] == [set(), {0}, {1}]


def test_single_op_schedule_frees_its_input():
    g = chain()
    s = schedule(g)
    assert len(s) == 2 and s.steps[1].free_after == {0}


def test_chain_peak():
    g = chain(OpKind.RELU, OpKind.RELU)
    _, mem = report(g, TensorShape(1, 100, 1, 1))
    assert mem.peak_bytes == 800


def test_conv_traffic_example():
    g = single_conv(cout=128)
    _, mem = report(g, TensorShape(1, 64, 56, 56))
    t = mem.per_node[1]
    assert (t.read_bytes, t.write_bytes) == (802_816 + 32_768, 1_605_632)
    assert t.read_bytes + t.write_bytes == 2_441_216


def test_harmonic_liveness_l4():
    g = build_block_graph(Mode.HARMONIC, [8, 13, 8, 22], 16)
    last = liveness(g)
    pos = g.position
    l1 = g.layer_outputs[(0, 1)]
    out_concat = g.inputs_of[g.output_id][0]
    # Layer 1 feeds layer 2 and, being odd, the block output.
    assert [c for c in g.consumers_of[l1] if c != out_concat] == [g.layer_entries[(0, 2)]]
    assert last[l1] == pos[out_concat]
    l2 = g.layer_outputs[(0, 2)]
    assert last[l2] == pos[g.layer_entries[(0, 4)]] < pos[out_concat]


def test_dense_liveness_l4():
    g = build_block_graph(Mode.DENSE, [8] * 4, 16)
    out_concat = g.inputs_of[g.output_id][0]
    assert liveness(g)[g.layer_outputs[(0, 1)]] == g.position[out_concat]


def test_threshnet79_harmonic_blocks_free_even_layers_early():
    g = build_graph(preset("threshnet79"))
    last = liveness(g)
    for b in (3, 4):
        L = preset("threshnet79").blocks[b].num_layers
        end = max(g.position[n.id] for n in g.nodes if n.block_index == b and n.stage == "block")
        for l in range(2, L, 2):
            assert last[g.layer_outputs[(b, l)]] < end


@pytest.mark.parametrize("L", range(4, 17))
def test_harmonic_peak_below_dense(L):
    widths = [harmonic_layer_width(20, 1.7, l) for l in range(1, L + 1)]
    peaks = {}
    for mode in (Mode.DENSE, Mode.HARMONIC):
        g = build_block_graph(mode, widths, 48)
        peaks[mode] = report(g, TensorShape(1, 48, 14, 14))[1].peak_bytes
    assert peaks[Mode.HARMONIC] < peaks[Mode.DENSE]


def _edge_bytes(graph, shapes):
    return sum(4 * shapes[e.src].sample_elements for e in graph.edges)


def _value_bytes(graph, shapes):
    return sum(
        4 * shapes[n.id].sample_elements for n in graph.nodes if n.kind is not OpKind.OUTPUT
    )


@pytest.mark.parametrize("name", ["threshnet79", "threshnet95", "densenet121"])
def test_preset_invariants(name):
    a = analyze_cached(name)
    mem = a.mem
    assert mem.memrw_mb == (mem.total_read_bytes + mem.total_write_bytes) / 1e6
    assert mem.total_write_bytes == _value_bytes(a.graph, a.shapes)
    assert mem.peak_bytes <= _edge_bytes(a.graph, a.shapes)
    assert a.mem_zero_copy.peak_bytes == mem.peak_bytes
    assert a.mem_zero_copy.memrw_mb < mem.memrw_mb
    check_schedule(a.graph, schedule(a.graph))


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 2**32))
def test_random_spec_invariants(seed):
    (spec,) = random_runnable_specs(1, seed)
    g = build_graph(spec)
    shapes, mem = report(g, TensorShape(1, 3, 32, 32))
    check_schedule(g, schedule(g))
    assert mem.total_write_bytes == _value_bytes(g, shapes)
    assert mem.peak_bytes <= _edge_bytes(g, shapes)


def test_zoo_traffic_by_hand():
    g = op_zoo()
    shapes, mem = report(g, TensorShape(1, 2, 6, 6))
    _, zc = report(g, TensorShape(1, 2, 6, 6), zero_copy_concat=True)
    concat = next(n.id for n in g.nodes if n.kind is OpKind.CONCAT)
    t = mem.per_node[concat]
    assert t.read_bytes == t.write_bytes == 4 * 14 * 36
    assert mem.total_read_bytes - zc.total_read_bytes == t.read_bytes


def _mutate(sched, fn):
    steps = [Step(s.node, set(s.free_after)) for s in sched.steps]
    fn(steps)
    return Schedule(tuple(Step(s.node, frozenset(s.free_after)) for s in steps))


def test_check_schedule_rejects_bad_schedules():
    g = chain(OpKind.RELU, OpKind.RELU)
    good = schedule(g)
    check_schedule(g, good)

    early = _mutate(good, lambda s: (s[2].free_after.discard(1), s[1].free_after.add(1)))
    with pytest.raises(ScheduleError, match="before its last use"):
        check_schedule(g, early)
    with pytest.raises(UseAfterFreeError):
        replay_peak(g, node_shapes(g, TensorShape(1, 1, 2, 2)), early)

    leak = _mutate(good, lambda s: s[2].free_after.clear())
    with pytest.raises(ScheduleError, match="never freed"):
        check_schedule(g, leak)

    twice = _mutate(good, lambda s: s[3].free_after.add(1))
    with pytest.raises(ScheduleError, match="twice"):
        check_schedule(g, twice)

    reordered = Schedule(tuple(reversed(good.steps)))
    with pytest.raises(ScheduleError, match="order"):
        check_schedule(g, reordered)


def test_replay_never_reads_freed_buffers_on_random_specs():
    for spec in random_runnable_specs(30, seed=7):
        g = build_graph(spec)
        replay_peak(g, node_shapes(g, TensorShape(1, 3, 32, 32)), schedule(g))
