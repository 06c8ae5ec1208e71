"""Backend selection for the hot kernels.

Set ``PILOTWAVE_DISABLE_NUMBA=1`` to force the pure-numpy path. The choice
can also be switched at runtime with :func:`set_backend`, which the test
suite and the benchmark use to exercise both paths in one process.
"""
from __future__ import annotations

import contextlib
import os

try:
    import numba

    # an old system TBB only triggers a warning; prefer layers that work quietly
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "PILOTWAVE_DISABLE_NUMBA"

_disabled = os.environ.get(ENV_FLAG, "0").strip().lower() in ("1", "true", "yes", "on")
_backend = "numba" if (HAVE_NUMBA and not _disabled) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextlib.contextmanager
def backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def available_backends() -> list[str]:
    return ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


def set_num_threads(k: int | None) -> None:
    if HAVE_NUMBA and k:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))
