"""Kernel backends for the reference executor.

``numba`` is used when importable unless ``THRESHPROF_NO_NUMBA`` is set to
a non-empty value other than ``0``; ``numpy`` is the fallback. Both produce
bit-identical results.
"""

import os
from types import ModuleType

from . import numpy_kernels

BACKENDS = ("numba", "numpy")


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _env_disables_numba() -> bool:
    return os.environ.get("THRESHPROF_NO_NUMBA", "") not in ("", "0")


def default_backend() -> str:
    if _env_disables_numba() or not numba_available():
        return "numpy"
    return "numba"


def get_kernels(backend: str | None = None) -> ModuleType:
    backend = backend or default_backend()
    if backend == "numpy":
        return numpy_kernels
    if backend == "numba":
        from . import numba_kernels

        return numba_kernels
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
