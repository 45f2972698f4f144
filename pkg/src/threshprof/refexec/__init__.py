from .executor import (
    BN_EPS,
    ExecutionError,
    WeightStore,
    checksum,
    exec_naive,
    exec_scheduled,
    init_weights,
    random_input,
)
from .kernels import default_backend, get_kernels
from .rng import SplitMix64, splitmix64_stream

__all__ = [
    "BN_EPS",
    "ExecutionError",
    "SplitMix64",
    "WeightStore",
    "checksum",
    "default_backend",
    "exec_naive",
    "exec_scheduled",
    "get_kernels",
    "init_weights",
    "random_input",
    "splitmix64_stream",
]
