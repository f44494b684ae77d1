"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``EPIMEM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("EPIMEM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined,no-redef]
    except ImportError:
        _impl = _pykernels

IMPLEMENTATION: str = _impl.IMPLEMENTATION
intersect_sorted = _impl.intersect_sorted
merge_disjoint = _impl.merge_disjoint
fold_deltas = _impl.fold_deltas

__all__ = ["IMPLEMENTATION", "intersect_sorted", "merge_disjoint", "fold_deltas"]
