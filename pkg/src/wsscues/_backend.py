"""Select the compiled kernels when available, else the numpy fallback.

Set ``WSSCUES_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available():
    """Names of the kernel backends importable in this environment."""
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def get(name=None):
    """Return the kernel module called ``name`` (default: best available)."""
    if name is None:
        if _compiled is not None and os.environ.get("WSSCUES_PURE_PYTHON", "") in ("", "0"):
            return _compiled
        return _kernels_py
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


kernels = get()
BACKEND = kernels.NAME
