"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; otherwise the
NumPy reference kernels are used.  `set_backend` exists for cross-checking
and benchmarking, not for everyday use.
"""

import os

from . import _kernels_np

try:
    from . import _kernels as _kernels_cy
except ImportError:  # pragma: no cover - depends on build environment
    _kernels_cy = None

if os.environ.get("PINCHFLOW_BACKEND") == "numpy":
    _active = _kernels_np
else:
    _active = _kernels_cy if _kernels_cy is not None else _kernels_np


def available_backends():
    names = ["numpy"]
    if _kernels_cy is not None:
        names.insert(0, "cython")
    return names


def get_backend():
    """Name of the kernel backend currently in use."""
    return _active.BACKEND


def set_backend(name):
    """Force a backend by name ('cython' or 'numpy'). Returns the previous name."""
    global _active
    prev = _active.BACKEND
    if name == "numpy":
        _active = _kernels_np
    elif name == "cython":
        if _kernels_cy is None:
            raise ValueError("compiled kernels are not available")
        _active = _kernels_cy
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def kernels():
    """Module providing the active kernel implementations."""
    return _active


def thread_count():
    """Worker cap for sample-parallel verification (PINCHFLOW_THREADS)."""
    env = os.environ.get("PINCHFLOW_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)
