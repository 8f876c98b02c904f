"""Backend selection for the hot kernels.

The Cython extension is used when importable; set ``MLCIRC_PURE_PYTHON=1``
to force the pure-Python fallback (both must agree bit for bit).
"""

from __future__ import annotations

import os

from mlcirc import _pykernels

if os.environ.get("MLCIRC_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from mlcirc import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

# elements are kept in int64 and products must not overflow
MAX_KERNEL_PRIME = 1 << 31


def backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython"/"python"), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from mlcirc import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def rank_modp(a, p: int) -> int:
    if p >= MAX_KERNEL_PRIME:
        return _pykernels.rank_modp(a, p)
    return _impl.rank_modp(a, p)


def rref_modp(a, p: int):
    if p >= MAX_KERNEL_PRIME:
        return _pykernels.rref_modp(a, p)
    return _impl.rref_modp(a, p)


def first_unbalancing(masks, n: int, start: int, count: int, threshold2: int):
    return _impl.first_unbalancing(masks, n, start, count, threshold2)


def coverage_table(cands, parts, limit2: int):
    return _impl.coverage_table(cands, parts, limit2)
