"""Kernel backend selection.

The compiled extension is used when it imported successfully and both the
model and the proposal family have a native description.  Setting
``EEMCS_PURE_PYTHON=1`` forces the pure-Python kernels everywhere.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    if os.environ.get("EEMCS_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure Python forced by EEMCS_PURE_PYTHON")
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on build
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"


def native_ok(model, proposals) -> bool:
    return (_ckernels is not None and getattr(model, "native", None) is not None
            and getattr(proposals, "native", None) is not None)


def mcs_advance(model, proposals, *args, backend=None):
    if _use_c(model, proposals, backend):
        return _ckernels.mcs_advance(model.native, proposals.native, *args)
    return _kernels_py.mcs_advance(model, proposals, *args)


def ee_advance(model, proposals, *args, backend=None):
    if _use_c(model, proposals, backend):
        return _ckernels.ee_advance(model.native, proposals.native, *args)
    return _kernels_py.ee_advance(model, proposals, *args)


def ee_replay(model, proposals, *args, backend=None):
    if _use_c(model, proposals, backend):
        return _ckernels.ee_replay(model.native, proposals.native, *args)
    return _kernels_py.ee_replay(model, proposals, *args)


def _use_c(model, proposals, backend):
    if backend == "python":
        return False
    if backend == "cython":
        if not native_ok(model, proposals):
            raise RuntimeError("compiled backend unavailable for this model/proposal")
        return True
    return native_ok(model, proposals)
