"""Select the kernel backend at import time.

The compiled ``_ckernels`` extension is used when it is importable; setting
``REEBLAB_PURE_PYTHON=1`` forces the numpy reference implementation.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("REEBLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def use(name: str) -> None:
    """Switch backend at runtime (``"cython"`` or ``"python"``); used by benchmarks and tests."""
    global kernels, BACKEND
    if name == "python":
        kernels, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels  # type: ignore[attr-defined]

        kernels, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
