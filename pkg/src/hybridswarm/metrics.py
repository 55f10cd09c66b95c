"""Evaluation quantities: waiting times, tree occupancy, coverage and message rates."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .swarm import Agent, Mode

log = logging.getLogger(__name__)

EVENT_FIELDS = ("id", "x", "y", "spawn", "first_obs", "completed", "waiting")
TIMESERIES_FIELDS = ("t", "op_msgs", "intra_msgs", "in_trees", "trees", "coverage")


@dataclass
class RunRecord:
    """Everything one seeded replicate produced.

    ``events`` holds one tuple per spawned event in ``EVENT_FIELDS`` order
    (``None`` where a timestamp was never reached); ``timeseries`` is an
    (T, 6) array in ``TIMESERIES_FIELDS`` order.
    """

    events: list
    timeseries: np.ndarray
    fingerprint: str
    seed: int
    label: str = ""
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.timeseries[:, TIMESERIES_FIELDS.index(name)]

    def waiting_times(self) -> np.ndarray:
        w = [row[6] for row in self.events if row[6] is not None]
        return np.asarray(w, dtype=float)

    def mean_waiting_time(self) -> Optional[float]:
        w = self.waiting_times()
        return float(w.mean()) if len(w) else None

    def censored(self) -> int:
        """Events never observed before the run ended."""
        return sum(1 for row in self.events if row[4] is None)


def iqr(values) -> float:
    q1, q3 = np.percentile(values, [25, 75])  # linear interpolation
    return float(q3 - q1)


def waiting_time_summary(records: Sequence[RunRecord]) -> dict:
    """Median and IQR, across replicates, of each replicate's mean waiting time."""
    if not records:
        raise ValueError("need at least one replicate")
    means = []
    for r in records:
        m = r.mean_waiting_time()
        if m is None:
            log.warning("replicate seed=%s observed no events; excluded", r.seed)
            continue
        means.append(m)
    if not means:
        return {"median": None, "iqr": None, "replicate_means": [], "excluded": len(records)}
    return {
        "median": float(np.median(means)),
        "iqr": iqr(means),
        "replicate_means": means,
        "excluded": len(records) - len(means),
    }


def agents_in_trees(agents: Sequence[Agent]) -> int:
    return sum(1 for a in agents if a.mode in (Mode.ROOT, Mode.TREE_MEMBER, Mode.RELOCATING))


def coverage(member_positions, sensing_range: float, env) -> float:
    """Area (m^2) of the union of sensing discs, by counting covered grid-cell centres."""
    pts = kernels.as_points(member_positions)
    if len(pts) == 0:
        return 0.0
    cells = kernels.union_cells(pts, sensing_range, env.width, env.height, env.grid_resolution)
    return cells * env.grid_resolution ** 2


def message_rates(records: Sequence[RunRecord], dt: float = 1.0) -> dict:
    """Per-replicate time-averaged operator and intra-swarm message rates plus mean/std."""
    if not records:
        raise ValueError("need at least one replicate")
    op = np.array([r.column("op_msgs").mean() / dt if len(r.timeseries) else 0.0
                   for r in records])
    intra = np.array([r.column("intra_msgs").mean() / dt if len(r.timeseries) else 0.0
                      for r in records])
    return {
        "points": [(float(a), float(b)) for a, b in zip(op, intra)],
        "operator_mean": float(op.mean()),
        "operator_std": float(op.std()),
        "operator_median": float(np.median(op)),
        "operator_iqr": iqr(op),
        "intra_mean": float(intra.mean()),
        "intra_std": float(intra.std()),
        "cov": np.cov(np.vstack([op, intra])).tolist() if len(records) > 1 else [[0.0, 0.0], [0.0, 0.0]],
    }


def rolling(x: np.ndarray, window: int, fn) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < window:
        return np.array([fn(x)]) if len(x) else np.array([])
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    return fn(view, axis=1)


def plateau_stats(series, window: int = 500, tolerance: float = 0.10) -> dict:
    """Plateau level and stability of an occupancy curve.

    The plateau is the mean over the final third. ``max_rolling_std`` is the
    largest ``window``-step rolling standard deviation inside the final
    third; ``time_to_plateau`` is the first step at which the ``window``-step
    trailing mean comes within ``tolerance`` of the plateau level.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    tail = x[n - n // 3:] if n >= 3 else x
    level = float(tail.mean()) if len(tail) else 0.0
    stds = rolling(tail, window, np.std)
    max_std = float(stds.max()) if len(stds) else 0.0
    means = rolling(x, window, np.mean)
    reach = None
    if level > 0:
        ok = np.flatnonzero(np.abs(means - level) <= tolerance * level)
        if len(ok):
            reach = int(ok[0]) + min(window, n) - 1
    return {
        "level": level,
        "max_rolling_std": max_std,
        "relative_std": max_std / level if level > 0 else math.inf,
        "time_to_plateau": reach,
    }


def spearman(x, y) -> float:
    """Spearman rank correlation (average ranks for ties); 0 when either side is constant."""
    if np.ptp(np.asarray(x, dtype=float)) == 0 or np.ptp(np.asarray(y, dtype=float)) == 0:
        return 0.0
    return float(stats.spearmanr(x, y).statistic)
