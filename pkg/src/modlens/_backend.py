"""Kernel backend selection: numba-jitted fast paths with a numpy fallback.

The hot numeric kernels (tree split scans, tree traversal, Shapley path
recursion) are written once in njit-compatible numpy and compiled with
numba when available.  Selection order:

* ``MODLENS_NUMBA=0`` (or ``off``/``false``) forces the pure-numpy path.
* otherwise numba is used when importable.

``set_backend()`` overrides the choice at runtime (used by the benchmark
in ``benchmarks/bench_backends.py`` and by the backend-equality tests).
"""

from __future__ import annotations

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_ENV_OFF = os.environ.get("MODLENS_NUMBA", "").strip().lower() in ("0", "off", "false")

_state = {"use_numba": _HAVE_NUMBA and not _ENV_OFF}


def have_numba() -> bool:
    return _HAVE_NUMBA


def using_numba() -> bool:
    return _state["use_numba"]


def set_backend(name: str) -> None:
    """Select 'numba', 'numpy', or 'auto' for subsequent kernel calls."""
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        _state["use_numba"] = True
    elif name == "numpy":
        _state["use_numba"] = False
    elif name == "auto":
        _state["use_numba"] = _HAVE_NUMBA and not _ENV_OFF
    else:
        raise ValueError(f"unknown backend {name!r}")


def compile_kernel(py_func):
    """Return a dispatcher calling the jitted or plain version of py_func."""
    jitted = numba.njit(cache=True)(py_func) if _HAVE_NUMBA else None

    def dispatch(*args):
        if _state["use_numba"] and jitted is not None:
            return jitted(*args)
        return py_func(*args)

    dispatch.py_func = py_func
    dispatch.jitted = jitted
    dispatch.__name__ = py_func.__name__
    return dispatch
