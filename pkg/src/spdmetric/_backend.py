"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
fallback. Setting ``SPDMETRIC_PURE_PYTHON=1`` forces the fallback.
"""
import importlib
import os

from . import _kernels_py

_FORCE_PURE = os.environ.get("SPDMETRIC_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-Python backend forced")
    from . import _ckernels as kernels
    BACKEND = "cython"
except ImportError:
    kernels = _kernels_py
    BACKEND = "python"


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module(f"{__package__}._ckernels")
        names.append("cython")
    except ImportError:
        pass
    return names


def get(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``), or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module(f"{__package__}._ckernels")
    raise ValueError(f"unknown backend {name!r}")
