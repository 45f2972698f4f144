"""Topology compiler and analytical profiler for threshold-gated dense/harmonic CNNs."""

__version__ = "0.1.0"
TOOL_VERSION = f"threshprof {__version__}"
