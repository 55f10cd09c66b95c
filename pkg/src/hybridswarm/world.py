"""Bounded environment, Gaussian event density and the event lifecycle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

EVENT_BUDGET = 200.0  # observation-seconds needed to complete an event


class DomainError(ValueError):
    """A point or parameter lies outside the environment's domain."""


@dataclass(frozen=True)
class GaussianDensity:
    mean: tuple[float, float] = (50.0, 50.0)
    cov: tuple[float, float] = (50.0, 50.0)  # diagonal of the covariance matrix, m^2

    def __post_init__(self):
        if min(self.cov) <= 0:
            raise DomainError(f"covariance diagonal must be positive, got {self.cov}")

    def pdf(self, x, y):
        vx, vy = self.cov
        dx = np.asarray(x, dtype=float) - self.mean[0]
        dy = np.asarray(y, dtype=float) - self.mean[1]
        norm = 1.0 / (2.0 * math.pi * math.sqrt(vx * vy))
        return norm * np.exp(-0.5 * (dx * dx / vx + dy * dy / vy))


@dataclass(frozen=True)
class Environment:
    """Rectangle ``[0, width] x [0, height]`` discretised on a square grid.

    Grid points sit at integer multiples of ``grid_resolution``; they are the
    only places events spawn and the only relocation targets.
    """

    width: float = 100.0
    height: float = 100.0
    grid_resolution: float = 1.0
    density: GaussianDensity = GaussianDensity()
    event_rate: float = 0.05  # events per second over the whole area

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DomainError("environment must have positive width and height")
        if self.grid_resolution <= 0:
            raise DomainError("grid_resolution must be positive")
        if self.event_rate < 0:
            raise DomainError("event_rate must be non-negative")

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    @cached_property
    def grid_points(self) -> np.ndarray:
        """All grid points as an (G, 2) array, ordered by x then y."""
        res = self.grid_resolution
        xs = np.arange(int(math.floor(self.width / res + 1e-9)) + 1) * res
        ys = np.arange(int(math.floor(self.height / res + 1e-9)) + 1) * res
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.ascontiguousarray(np.stack([gx.ravel(), gy.ravel()], axis=1))

    @cached_property
    def _grid_cdf(self) -> np.ndarray:
        w = self.density.pdf(self.grid_points[:, 0], self.grid_points[:, 1])
        cdf = np.cumsum(w)
        return cdf / cdf[-1]


def density_at(env: Environment, p) -> float:
    x, y = float(p[0]), float(p[1])
    if not env.contains(x, y):
        raise DomainError(f"point ({x}, {y}) outside {env.width}x{env.height} environment")
    return float(env.density.pdf(x, y))


@dataclass(slots=True)
class Event:
    id: int
    x: float
    y: float
    spawn_time: float
    budget_remaining: float = EVENT_BUDGET
    first_observed_at: Optional[float] = None
    completed_at: Optional[float] = None

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def waiting_time(self) -> Optional[float]:
        if self.first_observed_at is None:
            return None
        return self.first_observed_at - self.spawn_time


def sample_grid_locations(env: Environment, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` grid points with probability proportional to the density."""
    idx = np.searchsorted(env._grid_cdf, rng.random(count), side="right")
    idx = np.minimum(idx, len(env._grid_cdf) - 1)
    return env.grid_points[idx]


def spawn_events(env: Environment, t: float, dt: float, rng: np.random.Generator,
                 first_id: int = 0) -> list[Event]:
    """Poisson number of new events (mean ``event_rate * dt``) at density-weighted grid points."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    count = int(rng.poisson(env.event_rate * dt))
    if count == 0:
        return []
    locs = sample_grid_locations(env, count, rng)
    return [Event(first_id + k, float(x), float(y), float(t)) for k, (x, y) in enumerate(locs)]


def step_event_completion(active_events: dict[int, Event], observers: Mapping[int, object],
                          dt: float, t: float) -> list[int]:
    """Charge each event one observation-second per observer and retire finished ones.

    ``observers`` maps event id to the agents observing it (any sized
    collection). Completed events are removed from ``active_events`` and
    their ids returned in ascending order.
    """
    done = []
    for eid, who in observers.items():
        k = len(who)
        if k == 0:
            continue
        ev = active_events.get(eid)
        if ev is None:
            continue
        if ev.first_observed_at is None:
            ev.first_observed_at = t
        ev.budget_remaining = max(0.0, ev.budget_remaining - k * dt)
        if ev.budget_remaining <= 0.0:
            ev.completed_at = t
            done.append(eid)
    done.sort()
    for eid in done:
        del active_events[eid]
    return done


class EventField:
    """Mutable event state for one replicate: the active set plus a full registry."""

    def __init__(self, env: Environment, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self.active: dict[int, Event] = {}
        self.registry: list[Event] = []
        self._positions: Optional[np.ndarray] = None
        self._ids: list[int] = []

    def spawn(self, t: float, dt: float) -> list[Event]:
        new = spawn_events(self.env, t, dt, self.rng, first_id=len(self.registry))
        for ev in new:
            self.registry.append(ev)
            self.active[ev.id] = ev
        if new:
            self._positions = None
        return new

    def snapshot(self) -> tuple[list[int], np.ndarray]:
        """Ids (ascending) and positions of the active events."""
        if self._positions is None:
            self._ids = sorted(self.active)
            self._positions = np.array([self.active[i].location for i in self._ids],
                                       dtype=np.float64).reshape(-1, 2)
        return self._ids, self._positions

    def complete(self, observers: Mapping[int, object], dt: float, t: float) -> list[int]:
        done = step_event_completion(self.active, observers, dt, t)
        if done:
            self._positions = None
        return done

    def location(self, eid: int) -> tuple[float, float]:
        ev = self.registry[eid]
        return (ev.x, ev.y)
