"""Select the simplex kernel backend at import time.

The compiled ``_simplex_core`` extension is preferred.  Setting
``SCENARIO_CERT_PURE_PYTHON=1`` forces the numpy fallback, which is also used
automatically when the extension was not built.
"""

import importlib
import os

_MODULES = {"cython": "scenario_cert._simplex_core", "python": "scenario_cert._simplex_py"}


def load_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    return importlib.import_module(_MODULES[name])


def _select():
    if os.environ.get("SCENARIO_CERT_PURE_PYTHON", "").strip() not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _mod = _select()
simplex_loop = _mod.simplex_loop
pivot = _mod.pivot
OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2


def use_backend(name):
    """Switch the active kernels in place; returns the previous backend name.

    Meant for benchmarks and equivalence tests running in one process.
    """
    global BACKEND, _mod, simplex_loop, pivot
    previous = BACKEND
    _mod = load_backend(name)
    BACKEND, simplex_loop, pivot = name, _mod.simplex_loop, _mod.pivot
    return previous
