"""splitmix64 streams, vectorised over numpy uint64."""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# XOR-ed into the seed for the input-image stream so it never coincides
# with a weight stream (those use small node ids).
INPUT_STREAM = 0xD1B54A32D192ED03


class SplitMix64:
    """Scalar reference generator (Python ints)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _M1) & MASK64
        z = ((z ^ (z >> 27)) * _M2) & MASK64
        return z ^ (z >> 31)


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of a splitmix64 generator started at ``seed``."""
    with np.errstate(over="ignore"):
        z = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GAMMA) + np.uint64(seed & MASK64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform53(bits: np.ndarray) -> np.ndarray:
    """Map raw 64-bit outputs to float64 in [0, 1) using the top 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def symmetric_uniform(seed: int, count: int, scale: float = 1.0) -> np.ndarray:
    """``count`` float32 values ``(2u - 1) * scale`` drawn from stream ``seed``."""
    u = uniform53(splitmix64_stream(seed, count))
    return ((2.0 * u - 1.0) * scale).astype(np.float32)
