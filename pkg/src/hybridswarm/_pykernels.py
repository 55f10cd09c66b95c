"""Pure numpy fallback for the compiled geometry kernels.

Same signatures and bit-identical results as ``_ckernels``. Distances are
compared squared (``dx*dx + dy*dy <= r*r``) in both backends so boundary
cases agree exactly.
"""
import math

import numpy as np


def _sqdist(a, b):
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    return dx * dx + dy * dy


def within_radius(a, b, r):
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.bool_)
    return _sqdist(a, b) <= r * r


def pairs_within(p, r):
    n = len(p)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    close = np.triu(_sqdist(p, p) <= r * r, k=1)
    i, j = np.nonzero(close)
    return np.stack([i, j], axis=1).astype(np.int64)


def count_within(points, centers, r):
    if len(centers) == 0:
        return np.zeros(len(points), dtype=np.int64)
    return (_sqdist(points, centers) <= r * r).sum(axis=1).astype(np.int64)


def annulus_mask(points, anchors, d_min, r_max):
    if len(anchors) == 0:
        return np.zeros(len(points), dtype=np.bool_)
    d2 = _sqdist(points, anchors)
    near = (d2 <= r_max * r_max).any(axis=1)
    clear = (d2 >= d_min * d_min).all(axis=1)
    return near & clear


def union_cells(centers, r, width, height, res):
    nx = int(width / res + 0.5)
    ny = int(height / res + 0.5)
    if len(centers) == 0 or nx <= 0 or ny <= 0:
        return 0
    grid = np.zeros((nx, ny), dtype=np.bool_)
    r2 = r * r
    for cx, cy in centers:
        i0 = max(math.ceil((cx - r) / res - 0.5), 0)
        i1 = min(math.floor((cx + r) / res - 0.5), nx - 1)
        j0 = max(math.ceil((cy - r) / res - 0.5), 0)
        j1 = min(math.floor((cy + r) / res - 0.5), ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        dx = (np.arange(i0, i1 + 1) + 0.5) * res - cx
        dy = (np.arange(j0, j1 + 1) + 0.5) * res - cy
        grid[i0:i1 + 1, j0:j1 + 1] |= (dx[:, None] * dx[:, None] + dy[None, :] * dy[None, :]) <= r2
    return int(grid.sum())
