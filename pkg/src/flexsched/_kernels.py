"""Backend selection for the hot loops.

The compiled extension is used when importable; setting
``FLEXSCHED_PURE_PYTHON=1`` forces the pure-Python twin.
"""

from __future__ import annotations

import importlib
import os

from . import _pykernels


def load(name: str):
    """Kernel module by backend name, ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("flexsched._ckernels")
    raise ValueError(f"unknown backend {name!r}")


def available() -> list:
    out = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        out.insert(0, "cython")
    return out


if os.environ.get("FLEXSCHED_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = available()[0]

kernels = load(BACKEND)
