"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 invalid configuration
(including shape underflow), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import TOOL_VERSION
from .analysis import Analysis, analyze, check_input_size, with_classes
from .config import PRESET_NAMES, ConfigError, NetworkSpec, parse_config, preset
from .graphio import graph_to_dot, graph_to_json
from .memplan import ScheduleError, schedule
from .refexec import checksum, exec_naive, exec_scheduled, init_weights, random_input
from .refexec.executor import ExecutionError
from .shapes import ShapeError, TensorShape
from .topology import GraphError, build_graph

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_spec(source: str) -> NetworkSpec:
    """A preset name or a path to a JSON network description."""
    if source.lower() in PRESET_NAMES:
        return preset(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"{source}: no such preset or config file (presets: {', '.join(PRESET_NAMES)})")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{source}: {exc.strerror}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror}") from None


# -- describe ------------------------------------------------------------------


def describe_text(a: Analysis) -> str:
    doc = a.document()
    h = f"{'Block':<6} {'Mode':<9} {'Layers':>6} {'k':>5} {'In ch':>6} {'Out ch':>7}  Output size"
    lines = [f"{doc.name}  (input {doc.input_shape[2]}x{doc.input_shape[3]}, threshold {a.spec.threshold})", h]
    for r in doc.blocks:
        lines.append(
            f"{r.index:<6} {r.mode:<9} {r.layers:>6} {r.growth_rate:>5} {r.in_channels:>6} {r.out_channels:>7}"
            f"  {r.height} x {r.width}"
        )
    return "\n".join(lines) + "\n"


def cmd_describe(args) -> int:
    a = analyze(load_spec(args.source), args.input)
    _emit(describe_text(a), args.out)
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def analysis_text(a: Analysis) -> str:
    d = a.document()
    lines = [
        f"network         {d.name}",
        f"input           {tuple(d.input_shape)}",
        f"modes           {', '.join(d.modes)}",
        f"depth           {d.depth}",
        f"params          {d.total_params}  ({d.total_params / 1e6:.2f} M)",
        f"macc            {d.total_macc}  (FLOPs {d.reported_flops / 1e9:.2f} G, MACs {d.reported_macs / 1e9:.2f} G)",
        f"read bytes      {d.read_bytes}",
        f"write bytes     {d.write_bytes}",
        f"MemR+W          {d.memrw_mb!r} MB",
        f"MemR+W (zc)     {d.memrw_mb_zero_copy!r} MB",
        f"peak bytes      {d.peak_bytes}",
        f"tool            {d.tool_version}",
    ]
    return "\n".join(lines) + "\n"


def cmd_analyze(args) -> int:
    a = analyze(load_spec(args.source), args.input, args.classes)
    if args.format == "json":
        text = json.dumps(a.document().to_dict(), indent=2) + "\n"
    else:
        text = analysis_text(a)
    _emit(text, args.out)
    return EXIT_OK


# -- export --------------------------------------------------------------------


def cmd_export(args) -> int:
    graph = build_graph(with_classes(load_spec(args.source), args.classes))
    text = graph_to_dot(graph) if args.format == "dot" else graph_to_json(graph)
    _emit(text, args.out)
    return EXIT_OK


# -- exec ----------------------------------------------------------------------


def cmd_exec(args) -> int:
    spec = with_classes(load_spec(args.source), args.classes)
    check_input_size(args.input)
    graph = build_graph(spec)
    shape = TensorShape(1, 3, args.input, args.input)
    weights = init_weights(graph, args.seed, shape)
    x = random_input(shape, args.seed)
    y = exec_scheduled(graph, schedule(graph), weights, x, backend=args.backend)
    lines = [
        f"network   {spec.name}",
        f"input     {tuple(shape)}",
        f"seed      {args.seed}",
        f"shape     {tuple(y.shape)}",
        f"checksum  {checksum(y)}",
    ]
    if args.verify:
        ref = exec_naive(graph, weights, x, backend=args.backend)
        if ref.shape != y.shape or ref.tobytes() != y.tobytes():
            raise InvariantError(f"scheduled output {checksum(y)} differs from naive output {checksum(ref)}")
        lines.append("verify    scheduled == naive (bitwise)")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# -- compare -------------------------------------------------------------------

COMPARE_HEADER = ("Name", "Params (M)", "MACs (G)", "FLOPs (G)", "MemR+W (MB)")


def compare_rows(analyses: list[Analysis]) -> list[tuple[str, float, float, float, float]]:
    return [
        (
            a.spec.name,
            a.cost.total_params / 1e6,
            a.cost.reported_macs / 1e9,
            a.cost.reported_flops / 1e9,
            a.mem.memrw_mb,
        )
        for a in analyses
    ]


def cmd_compare(args) -> int:
    analyses = [analyze(load_spec(s), args.input, args.classes) for s in (args.a, args.b)]
    rows = compare_rows(analyses)
    if args.format == "json":
        text = json.dumps(
            {
                "schema": "threshprof.compare/1",
                "tool_version": TOOL_VERSION,
                "input": args.input,
                "columns": list(COMPARE_HEADER),
                "rows": [list(r) for r in rows],
            },
            indent=2,
        )
        text += "\n"
    else:
        out = ["{:<16} {:>11} {:>9} {:>10} {:>12}".format(*COMPARE_HEADER)]
        for r in rows:
            out.append(f"{r[0]:<16} {r[1]:>11.2f} {r[2]:>9.2f} {r[3]:>10.2f} {r[4]:>12.2f}")
        text = "\n".join(out) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="threshprof", description="Build, profile and execute ThreshNet-style networks.")
    p.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, classes=True, fmt=None):
        sp.add_argument("--input", type=int, default=224, help="square input size (default 224)")
        if classes:
            sp.add_argument("--classes", type=int, default=None, help="classifier classes (default: from spec)")
        if fmt:
            sp.add_argument("--format", choices=fmt, default=fmt[0])
        sp.add_argument("--out", default=None, help="write to this path instead of stdout")

    sp = sub.add_parser("describe", help="per-block mode/width/size table")
    sp.add_argument("source", help="preset name or config path")
    common(sp, classes=False)
    sp.set_defaults(func=cmd_describe)

    sp = sub.add_parser("analyze", help="params, macc, traffic and peak memory")
    sp.add_argument("source")
    common(sp, fmt=["text", "json"])
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("export", help="write the compute graph as DOT or JSON")
    sp.add_argument("source")
    sp.add_argument("--classes", type=int, default=None)
    sp.add_argument("--format", choices=["dot", "json"], default="dot")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("exec", help="run the reference executor and print a checksum")
    sp.add_argument("source")
    common(sp)
    sp.add_argument("--seed", type=_u64, default=0)
    sp.add_argument("--verify", action="store_true", help="also run naive execution and require bit equality")
    sp.add_argument("--backend", choices=["numba", "numpy"], default=None)
    sp.set_defaults(func=cmd_exec)

    sp = sub.add_parser("compare", help="two-row comparison table")
    sp.add_argument("a")
    sp.add_argument("b")
    common(sp, fmt=["text", "json"])
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ShapeError) as exc:
        print(f"threshprof: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"threshprof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, ScheduleError, ExecutionError, GraphError) as exc:
        print(f"threshprof: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
