"""Selects the compiled stepping loop when available, else the NumPy one.

Set ATTRACTOR_LAB_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _imex_py

BACKEND = "python"
run = _imex_py.run

if os.environ.get("ATTRACTOR_LAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _imex  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        run = _imex.run
        BACKEND = "cython"


def backends():
    """Mapping of available backend names to their run functions."""
    out = {"python": _imex_py.run}
    try:
        from . import _imex  # type: ignore[attr-defined]
        out["cython"] = _imex.run
    except ImportError:
        pass
    return out
