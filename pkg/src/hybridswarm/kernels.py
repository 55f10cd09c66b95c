"""Geometry kernels with backend selection at import.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``HYBRIDSWARM_PURE_PYTHON`` is set to a non-empty
value, the numpy implementation is used. ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("HYBRIDSWARM_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def as_points(xy):
    """Coerce a sequence of (x, y) pairs into a C-contiguous (n, 2) float array."""
    arr = np.ascontiguousarray(xy, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.float64)
    return arr.reshape(-1, 2)


def within_radius(a, b, r):
    """Boolean (len(a), len(b)) matrix, True where the points are at most ``r`` apart."""
    return _impl.within_radius(as_points(a), as_points(b), float(r))


def pairs_within(p, r):
    """Index pairs ``(i, j)``, ``i < j``, of points at most ``r`` apart, row-major order."""
    return _impl.pairs_within(as_points(p), float(r))


def count_within(points, centers, r):
    """For each point, how many centers lie within ``r``."""
    return _impl.count_within(as_points(points), as_points(centers), float(r))


def annulus_mask(points, anchors, d_min, r_max):
    """True for points within ``r_max`` of some anchor and at least ``d_min`` from all anchors."""
    return _impl.annulus_mask(as_points(points), as_points(anchors), float(d_min), float(r_max))


def union_cells(centers, r, width, height, res):
    """Number of grid cells whose centres lie within ``r`` of any center."""
    return int(_impl.union_cells(as_points(centers), float(r), float(width), float(height), float(res)))
