"""Declarative network descriptions, validation, JSON config I/O and presets."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import jsonschema

NETWORK_SCHEMA_ID = "threshprof.network/1"

ALLOWED_KERNELS = (1, 3, 7)
ALLOWED_STRIDES = (1, 2)


class ConfigError(ValueError):
    """Base class for every configuration problem (CLI exit code 2)."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"syntax error at line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class ConfigSchemaError(ConfigError):
    pass


class UnknownPresetError(ConfigError):
    pass


class InvalidSpecError(ConfigError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class Mode(str, enum.Enum):
    AUTO = "auto"
    DENSE = "dense"
    HARMONIC = "harmonic"


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    has_bias: bool = False


@dataclass(frozen=True)
class StemSpec:
    convs: tuple[ConvSpec, ...]
    pool_kernel: int = 3
    pool_stride: int = 2
    pool_kind: str = "max"

    @property
    def pool_padding(self) -> int:
        return self.pool_kernel // 2


@dataclass(frozen=True)
class BlockSpec:
    num_layers: int
    growth_rate: int
    mode: Mode = Mode.AUTO
    multiplier: float = 1.7
    use_bottleneck: bool = True
    downsample_after: bool = True


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    stem: StemSpec
    blocks: tuple[BlockSpec, ...]
    channel_list: tuple[int, ...]
    threshold: int = 320
    dense_reduction: float = 0.5
    harmonic_reduction: float = 0.85
    classifier_classes: int = 1000


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


def _is_pos_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def validate(spec: NetworkSpec) -> list[Violation]:
    """Check every invariant of ``spec``.

    Returns an empty list when the spec is valid; otherwise one
    :class:`Violation` per broken rule, naming the field.
    """
    out: list[Violation] = []

    def bad(f: str, rule: str) -> None:
        out.append(Violation(f, rule))

    if not spec.name:
        bad("name", "must be non-empty")

    stem = spec.stem
    if not stem.convs:
        bad("stem.convs", "at least one conv required")
    for i, conv in enumerate(stem.convs):
        _check_conv(conv, f"stem.convs[{i}]", bad)
    if not _is_pos_int(stem.pool_kernel):
        bad("stem.pool_kernel", "must be a positive integer")
    if not _is_pos_int(stem.pool_stride):
        bad("stem.pool_stride", "must be a positive integer")
    if stem.pool_kind not in ("max", "avg"):
        bad("stem.pool_kind", "must be 'max' or 'avg'")

    if not spec.blocks:
        bad("blocks", "at least one block required")
    for i, blk in enumerate(spec.blocks):
        f = f"blocks[{i}]"
        if not _is_pos_int(blk.num_layers):
            bad(f + ".num_layers", "must be a positive integer")
        if not _is_pos_int(blk.growth_rate):
            bad(f + ".growth_rate", "must be a positive integer")
        if not isinstance(blk.mode, Mode):
            bad(f + ".mode", "must be one of auto, dense, harmonic")
        # Auto may resolve to harmonic, so it needs a usable multiplier too.
        if blk.mode in (Mode.HARMONIC, Mode.AUTO) and not blk.multiplier > 1:
            bad(f + ".multiplier", "multiplier must exceed 1")
        if blk.mode is Mode.DENSE and not blk.multiplier > 0:
            bad(f + ".multiplier", "multiplier must be positive")

    if len(spec.channel_list) != len(spec.blocks):
        bad("channel_list", "length must equal number of blocks")
    for i, c in enumerate(spec.channel_list):
        if not _is_pos_int(c):
            bad(f"channel_list[{i}]", "must be a positive integer")
    if stem.convs and spec.channel_list and stem.convs[-1].out_channels != spec.channel_list[0]:
        bad("stem.convs", "last conv must output channel_list[0] channels")

    if not _is_pos_int(spec.threshold):
        bad("threshold", "threshold must be > 0")
    for name in ("dense_reduction", "harmonic_reduction"):
        r = getattr(spec, name)
        if not 0 < r <= 1:
            bad(name, "reduction in (0,1]")
    if not _is_pos_int(spec.classifier_classes):
        bad("classifier_classes", "must be a positive integer")
    return out


def _check_conv(conv: ConvSpec, f: str, bad) -> None:
    if not _is_pos_int(conv.out_channels):
        bad(f + ".out_channels", "must be a positive integer")
    if conv.kernel not in ALLOWED_KERNELS:
        bad(f + ".kernel", f"kernel must be one of {ALLOWED_KERNELS}")
    if conv.stride not in ALLOWED_STRIDES:
        bad(f + ".stride", f"stride must be one of {ALLOWED_STRIDES}")
    if not (isinstance(conv.padding, int) and conv.padding >= 0):
        bad(f + ".padding", "must be a non-negative integer")


def check(spec: NetworkSpec) -> NetworkSpec:
    """Return ``spec`` unchanged or raise :class:`InvalidSpecError`."""
    violations = validate(spec)
    if violations:
        raise InvalidSpecError(violations)
    return spec


# -- presets -----------------------------------------------------------------

THRESHNET_CHANNELS = (128, 192, 288, 480, 960)
THRESHNET_GROWTH = (32, 32, 32, 40, 160)
THRESHNET_MODES = (Mode.DENSE, Mode.DENSE, Mode.DENSE, Mode.HARMONIC, Mode.HARMONIC)
THRESHNET_DOWNSAMPLE = (True, True, False, True, False)
THRESHNET_LAYERS = {
    "threshnet79": (6, 8, 12, 16, 4),
    "threshnet95": (6, 12, 16, 16, 4),
}


def _threshnet(name: str, layers: tuple[int, ...]) -> NetworkSpec:
    stem = StemSpec(
        convs=(
            ConvSpec(64, 3, stride=2, padding=1),
            ConvSpec(THRESHNET_CHANNELS[0], 3, stride=1, padding=1),
        ),
        pool_kernel=3,
        pool_stride=2,
        pool_kind="max",
    )
    blocks = tuple(
        BlockSpec(
            num_layers=n,
            growth_rate=k,
            mode=mode,
            multiplier=1.7,
            use_bottleneck=True,
            downsample_after=down,
        )
        for n, k, mode, down in zip(layers, THRESHNET_GROWTH, THRESHNET_MODES, THRESHNET_DOWNSAMPLE)
    )
    return NetworkSpec(
        name=name,
        stem=stem,
        blocks=blocks,
        channel_list=THRESHNET_CHANNELS,
        threshold=320,
        dense_reduction=0.5,
        harmonic_reduction=0.85,
        classifier_classes=1000,
    )


def _densenet121() -> NetworkSpec:
    stem = StemSpec(convs=(ConvSpec(64, 7, stride=2, padding=3),), pool_kernel=3, pool_stride=2, pool_kind="max")
    blocks = tuple(
        BlockSpec(num_layers=n, growth_rate=32, mode=Mode.DENSE, use_bottleneck=True, downsample_after=down)
        for n, down in zip((6, 12, 24, 16), (True, True, True, False))
    )
    return NetworkSpec(
        name="densenet121",
        stem=stem,
        blocks=blocks,
        channel_list=(64, 128, 256, 512),
        threshold=320,
        dense_reduction=0.5,
        harmonic_reduction=0.85,
        classifier_classes=1000,
    )


PRESET_NAMES = ("threshnet79", "threshnet95", "densenet121")


def preset(name: str) -> NetworkSpec:
    key = name.lower()
    if key in THRESHNET_LAYERS:
        spec = _threshnet(key, THRESHNET_LAYERS[key])
    elif key == "densenet121":
        spec = _densenet121()
    else:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return check(spec)


# -- JSON config ---------------------------------------------------------------


def _load_schema() -> dict:
    text = resources.files("threshprof").joinpath("schemas/network.schema.json").read_text()
    return json.loads(text)


_SCHEMA: dict | None = None


def network_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = _load_schema()
    return _SCHEMA


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "schema": NETWORK_SCHEMA_ID,
        "name": spec.name,
        "stem": {
            "convs": [
                {
                    "out_channels": c.out_channels,
                    "kernel": c.kernel,
                    "stride": c.stride,
                    "padding": c.padding,
                    "has_bias": c.has_bias,
                }
                for c in spec.stem.convs
            ],
            "pool_kernel": spec.stem.pool_kernel,
            "pool_stride": spec.stem.pool_stride,
            "pool_kind": spec.stem.pool_kind,
        },
        "blocks": [
            {
                "num_layers": b.num_layers,
                "growth_rate": b.growth_rate,
                "mode": b.mode.value,
                "multiplier": float(b.multiplier),
                "use_bottleneck": b.use_bottleneck,
                "downsample_after": b.downsample_after,
            }
            for b in spec.blocks
        ],
        "channel_list": list(spec.channel_list),
        "threshold": spec.threshold,
        "dense_reduction": float(spec.dense_reduction),
        "harmonic_reduction": float(spec.harmonic_reduction),
        "classifier_classes": spec.classifier_classes,
    }


def serialize(spec: NetworkSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def spec_from_dict(doc: Any) -> NetworkSpec:
    """Build a spec from an already-decoded JSON document.

    Structural problems raise :class:`ConfigSchemaError`; broken invariants
    raise :class:`InvalidSpecError`.
    """
    try:
        jsonschema.validate(doc, network_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigSchemaError(f"schema violation at {where}: {exc.message}") from None

    if len(doc["channel_list"]) != len(doc["blocks"]):
        raise ConfigSchemaError(
            f"schema violation at channel_list: {len(doc['channel_list'])} entries for {len(doc['blocks'])} blocks"
        )

    stem = doc["stem"]
    spec = NetworkSpec(
        name=doc["name"],
        stem=StemSpec(
            convs=tuple(ConvSpec(**c) for c in stem["convs"]),
            pool_kernel=stem["pool_kernel"],
            pool_stride=stem["pool_stride"],
            pool_kind=stem["pool_kind"],
        ),
        blocks=tuple(
            BlockSpec(
                num_layers=b["num_layers"],
                growth_rate=b["growth_rate"],
                mode=Mode(b["mode"]),
                multiplier=float(b["multiplier"]),
                use_bottleneck=b["use_bottleneck"],
                downsample_after=b["downsample_after"],
            )
            for b in doc["blocks"]
        ),
        channel_list=tuple(doc["channel_list"]),
        threshold=doc["threshold"],
        dense_reduction=float(doc["dense_reduction"]),
        harmonic_reduction=float(doc["harmonic_reduction"]),
        classifier_classes=doc["classifier_classes"],
    )
    return check(spec)


def parse_config(text: str) -> NetworkSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return spec_from_dict(doc)
