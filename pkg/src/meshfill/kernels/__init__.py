"""Kernel backend selection.

The compiled Cython extension is used when it imported cleanly; otherwise
the numpy fallback takes over. Set MESHFILL_FORCE_NUMPY=1 to force the
fallback (the benchmark and the backend-equivalence tests do this).
"""

from __future__ import annotations

import os

from .bvh import Bvh, build_bvh

if os.environ.get("MESHFILL_FORCE_NUMPY"):
    from . import _impl_py as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - build-environment dependent
        from . import _impl_py as _impl

        BACKEND = "numpy"


def get_impl(name: str):
    """Explicit backend lookup ('numpy' or 'compiled'); used by benchmarks."""
    if name == "numpy":
        from . import _impl_py

        return _impl_py
    if name == "compiled":
        from . import _core  # type: ignore[attr-defined]

        return _core
    raise ValueError(f"unknown backend {name!r}")


rasterize_tris = _impl.rasterize_tris
raycast_first_hit = _impl.raycast_first_hit
closest_tri = _impl.closest_tri

__all__ = [
    "BACKEND",
    "Bvh",
    "build_bvh",
    "closest_tri",
    "get_impl",
    "rasterize_tris",
    "raycast_first_hit",
]
