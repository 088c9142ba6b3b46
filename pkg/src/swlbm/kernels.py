"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy twin.
Set ``SWLBM_BACKEND=numpy`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "numpy"
_impl = _pykernels
if os.environ.get("SWLBM_BACKEND", "").lower() != "numpy":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

collide_stream = _impl.collide_stream
moments = _impl.moments


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython" or "numpy"); default is the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
