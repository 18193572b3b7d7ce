"""Backend selection for the O(N^3) quartet kernels.

The compiled extension is used when it imports; otherwise the numpy reference
implementation is used.  Set ``NLSPSD_BACKEND=python`` to force the fallback
or ``NLSPSD_BACKEND=cython`` to require the extension.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

__all__ = ["BACKEND", "get_backend", "psd_sums", "fwm_sum"]


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or auto)."""
    name = (name or os.environ.get("NLSPSD_BACKEND", "auto")).lower()
    if name == "python":
        return _pykernels
    compiled = _load_compiled()
    if name == "cython":
        if compiled is None:
            raise ImportError("NLSPSD_BACKEND=cython but the compiled extension is not built")
        return compiled
    if name != "auto":
        raise ValueError(f"unknown kernel backend {name!r}")
    return compiled if compiled is not None else _pykernels


_impl = get_backend()
BACKEND = "cython" if _impl is not _pykernels else "python"


def psd_sums(S, beta, alpha, span, nsp, weights, labels, target):
    return _impl.psd_sums(S, beta, alpha, span, nsp, weights, labels, target)


def fwm_sum(q, beta, alpha, span, nsp, weights):
    return _impl.fwm_sum(q, beta, alpha, span, nsp, weights)
