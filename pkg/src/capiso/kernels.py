"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``CAPISO_PURE_PYTHON=1`` to force the numpy implementations.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("CAPISO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

box_disk_area = _impl.box_disk_area
box_ball_volume = _impl.box_ball_volume
ball_overlap_sum = _impl.ball_overlap_sum
contact_mask = _impl.contact_mask
legendre_max = _impl.legendre_max

__all__ = [
    "BACKEND", "box_disk_area", "box_ball_volume", "ball_overlap_sum",
    "contact_mask", "legendre_max",
]
