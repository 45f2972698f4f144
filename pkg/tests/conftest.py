import random

import pytest

from threshprof.config import BlockSpec, ConvSpec, Mode, NetworkSpec, StemSpec, validate
from threshprof.shapes import ShapeError, TensorShape, node_shapes
from threshprof.topology import build_graph

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spec(rng: random.Random, name: str = "rand") -> NetworkSpec:
    """A small valid spec; shapes are not guaranteed to fit every input size."""
    n_blocks = rng.randint(1, 4)
    channels = tuple(rng.randint(2, 24) for _ in range(n_blocks))
    convs = []
    for _ in range(rng.randint(0, 1)):
        k = rng.choice((1, 3))
        convs.append(ConvSpec(rng.randint(2, 12), k, stride=rng.choice((1, 2)), padding=k // 2))
    k = rng.choice((1, 3, 7))
    convs.append(ConvSpec(channels[0], k, stride=rng.choice((1, 2)), padding=k // 2, has_bias=rng.random() < 0.3))
    blocks = tuple(
        BlockSpec(
            num_layers=rng.randint(1, 5),
            growth_rate=rng.randint(1, 8),
            mode=rng.choice(list(Mode)),
            multiplier=rng.choice((1.3, 1.6, 1.7, 2.0)),
            use_bottleneck=rng.random() < 0.5,
            downsample_after=rng.random() < 0.5,
        )
        for _ in range(n_blocks)
    )
    spec = NetworkSpec(
        name=name,
        stem=StemSpec(tuple(convs), pool_kernel=rng.choice((2, 3)), pool_stride=rng.choice((1, 2)), pool_kind=rng.choice(("max", "avg"))),
        blocks=blocks,
        channel_list=channels,
        threshold=rng.randint(1, 24),
        dense_reduction=0.5,
        harmonic_reduction=0.85,
        classifier_classes=rng.randint(1, 12),
    )
    assert validate(spec) == []
    return spec


def random_runnable_specs(count: int, seed: int, size: int = 32):
    """``count`` random specs whose graphs shape cleanly at ``size`` x ``size``."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        spec = random_spec(rng, name=f"rand{len(out)}")
        try:
            node_shapes(build_graph(spec), TensorShape(1, 3, size, size))
        except ShapeError:
            continue
        out.append(spec)
    return out


@pytest.fixture(scope="session")
def analyses():
    return {n: analyze_cached(n) for n in ("threshnet79", "threshnet95", "densenet121")}


_CACHE: dict = {}


def analyze_cached(name: str, size: int = 224):
    from threshprof.analysis import analyze
    from threshprof.config import preset

    key = (name, size)
    if key not in _CACHE:
        _CACHE[key] = analyze(preset(name), size)
    return _CACHE[key]
