"""Published reference figures and residual reconciliation for the presets.

The ThreshNet architecture is under-specified, so exact agreement with the
published parameter counts is not expected. :func:`reconcile` measures how
much of the residual each loosely defined convention can account for by
rebuilding the network with the alternative convention.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import NetworkSpec, preset
from .cost import network_cost, stage_totals
from .memplan import traffic
from .shapes import TensorShape, node_shapes
from .topology import build_graph


@dataclass(frozen=True)
class Reference:
    params_m: float
    macs_g: float
    flops_g: float
    memrw_mb: float


# Comparison-table rows for the networks this tool can build.
REFERENCE = {
    "densenet121": Reference(7.97, 5.74, 2.88, 359.71),
    "threshnet79": Reference(15.32, 6.90, 3.46, 299.96),
    "threshnet95": Reference(17.14, 8.12, 4.07, 360.30),
}


@dataclass(frozen=True)
class ConventionEffect:
    name: str
    alternative: str
    params: int
    delta: int


@dataclass(frozen=True)
class Reconciliation:
    name: str
    target_params: int
    params: int
    effects: tuple[ConventionEffect, ...]
    combined_params: int
    stage_params: dict[str, int]

    @property
    def residual(self) -> int:
        return self.params - self.target_params

    @property
    def relative_error(self) -> float:
        return self.residual / self.target_params

    @property
    def combined_relative_error(self) -> float:
        return (self.combined_params - self.target_params) / self.target_params


def _params(spec: NetworkSpec, **build_flags) -> tuple[int, dict[str, int]]:
    g = build_graph(spec, **build_flags)
    shapes = node_shapes(g, TensorShape(1, 3, 224, 224))
    rep = network_cost(g, None, shapes)
    return rep.total_params, {k: v.params for k, v in stage_totals(g, rep).items()}


def _narrow_stem(spec: NetworkSpec) -> NetworkSpec:
    convs = list(spec.stem.convs)
    convs[0] = dataclasses.replace(convs[0], out_channels=32)
    return dataclasses.replace(spec, stem=dataclasses.replace(spec.stem, convs=tuple(convs)))


def reconcile(name: str) -> Reconciliation:
    spec = preset(name)
    base, stages = _params(spec)
    variants = [
        ("stem widths", "first stem conv emits 32 channels instead of 64", _params(_narrow_stem(spec))[0]),
        (
            "harmonic output set",
            "harmonic block output omits the block input (odd layers + final only)",
            _params(spec, keep_harmonic_input=False)[0],
        ),
        ("transition BN", "transitions are a bare 1x1 conv (no BN+ReLU)", _params(spec, transition_bn=False)[0]),
    ]
    effects = tuple(ConventionEffect(n, alt, p, p - base) for n, alt, p in variants)
    combined, _ = _params(_narrow_stem(spec), keep_harmonic_input=False, transition_bn=False)
    return Reconciliation(
        name=name,
        target_params=round(REFERENCE[name].params_m * 1e6),
        params=base,
        effects=effects,
        combined_params=combined,
        stage_params=stages,
    )


def format_reconciliation(r: Reconciliation) -> str:
    lines = [
        f"{r.name}: {r.params / 1e6:.3f} M params vs published {r.target_params / 1e6:.2f} M "
        f"(residual {r.residual / 1e6:+.3f} M, {100 * r.relative_error:+.1f}%)",
        "  under-specified conventions, each applied alone:",
    ]
    for e in r.effects:
        lines.append(f"    {e.name:<20} {e.delta / 1e6:+8.3f} M  ({e.alternative})")
    lines.append(
        f"  all three together: {r.combined_params / 1e6:.3f} M ({100 * r.combined_relative_error:+.1f}% vs published)"
    )
    explained = r.params - r.combined_params
    lines.append(
        f"  conventions explain {explained / 1e6:.3f} M of the {r.residual / 1e6:.3f} M residual; "
        "the rest is fixed by the pinned widths:"
    )
    for stage, p in sorted(r.stage_params.items(), key=lambda kv: -kv[1])[:4]:
        lines.append(f"    {stage:<14} {p / 1e6:8.3f} M")
    return "\n".join(lines)


def traffic_by_stage(name: str, zero_copy_concat: bool = False) -> dict[str, float]:
    """MemR+W in MB grouped like :func:`threshprof.cost.stage_totals`."""
    g = build_graph(preset(name))
    shapes = node_shapes(g, TensorShape(1, 3, 224, 224))
    rep = network_cost(g, None, shapes)
    mem = traffic(g, shapes, rep, zero_copy_concat=zero_copy_concat)
    out: dict[str, float] = {}
    for node in g.nodes:
        key = node.stage
        if key in ("block", "transition"):
            key = f"{key}{node.block_index + 1}"
        t = mem.per_node[node.id]
        out[key] = out.get(key, 0.0) + (t.read_bytes + t.write_bytes) / 1e6
    return out
