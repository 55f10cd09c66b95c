"""Agent state, kinematics, sensing and neighbourhood queries."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .world import Environment, Event

MAX_SPEED = 1.0
TWO_PI = 2.0 * math.pi


class Mode(enum.Enum):
    FREE_ROAMING = "free"
    MOVING_TO_EVENT = "moving"
    OBSERVING_EVENT = "observing"
    TREE_MEMBER = "member"
    ROOT = "root"
    RELOCATING = "relocating"


FREE_MODES = frozenset({Mode.FREE_ROAMING, Mode.MOVING_TO_EVENT, Mode.OBSERVING_EVENT})
TREE_MODES = frozenset({Mode.TREE_MEMBER, Mode.ROOT, Mode.RELOCATING})
STATIONARY_MODES = frozenset({Mode.TREE_MEMBER, Mode.ROOT, Mode.OBSERVING_EVENT})


@dataclass(frozen=True)
class SensingModel:
    sensing_range: float = 5.0
    comm_range: float = 10.0

    def __post_init__(self):
        if not 0 < self.sensing_range <= self.comm_range:
            raise ValueError("need 0 < sensing_range <= comm_range, got "
                             f"{self.sensing_range}, {self.comm_range}")


@dataclass(slots=True, eq=False)
class Agent:
    id: int
    x: float
    y: float
    heading: float = 0.0
    speed: float = MAX_SPEED
    mode: Mode = Mode.FREE_ROAMING
    walk_timer: float = 0.0
    target_event: Optional[int] = None
    target_point: Optional[tuple[float, float]] = None
    # E_i: ids believed active, and ids known to be completed
    known_active: set = field(default_factory=set)
    known_done: set = field(default_factory=set)
    queue: list = field(default_factory=list)
    knowledge_changed: bool = False
    join_blocked_until: float = -math.inf

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def is_free(self) -> bool:
        return self.mode in FREE_MODES

    def learn(self, event_ids: Iterable[int]) -> None:
        new = set(event_ids) - self.known_active - self.known_done
        if new:
            self.known_active |= new
            self.knowledge_changed = True

    def forget_completed(self, event_ids: Iterable[int]) -> None:
        gone = set(event_ids)
        if not gone <= self.known_done:
            self.known_done |= gone
            self.known_active -= gone
            self.knowledge_changed = True


def random_walk_step(agent: Agent, env: Environment, dt: float, rng: np.random.Generator,
                     leg_bounds: tuple[float, float] = (5.0, 20.0), max_redraws: int = 1000):
    """Advance a free agent along its straight-line leg.

    A fresh heading (uniform on [0, 2pi)) and leg duration (uniform on
    ``leg_bounds``) are drawn when the current leg has run out; headings that
    would carry the agent out of bounds are redrawn.
    """
    if agent.walk_timer <= 0.0:
        agent.heading = float(rng.uniform(0.0, TWO_PI))
        agent.walk_timer = float(rng.uniform(*leg_bounds))
    step = agent.speed * dt
    nx = agent.x + step * math.cos(agent.heading)
    ny = agent.y + step * math.sin(agent.heading)
    tries = 0
    while not env.contains(nx, ny):
        if tries >= max_redraws:
            nx, ny = agent.x, agent.y
            break
        agent.heading = float(rng.uniform(0.0, TWO_PI))
        nx = agent.x + step * math.cos(agent.heading)
        ny = agent.y + step * math.sin(agent.heading)
        tries += 1
    agent.x, agent.y = nx, ny
    agent.walk_timer -= dt
    return agent.position


def move_towards(agent: Agent, target: Sequence[float], dt: float) -> bool:
    """Head straight for ``target``; snap onto it and return True once reachable this step."""
    dx = target[0] - agent.x
    dy = target[1] - agent.y
    dist = math.hypot(dx, dy)
    reach = agent.speed * dt
    if dist <= reach:
        agent.x, agent.y = float(target[0]), float(target[1])
        return True
    agent.heading = math.atan2(dy, dx) % TWO_PI
    agent.x += reach * dx / dist
    agent.y += reach * dy / dist
    return False


def sense_events(agent: Agent, active_events: Mapping[int, Event], sensing_range: float) -> set[int]:
    """Ids of active events within ``sensing_range`` (closed) of the agent; merged into its knowledge."""
    ids = sorted(active_events)
    if not ids:
        return set()
    pts = [active_events[i].location for i in ids]
    hit = kernels.within_radius([agent.position], pts, sensing_range)[0]
    found = {ids[k] for k in np.flatnonzero(hit)}
    agent.learn(found)
    return found


def neighbors_within(agent: Agent, rng_m: float, swarm: Sequence[Agent]) -> set[int]:
    """Ids of the other agents at Euclidean distance <= ``rng_m``."""
    others = [a for a in swarm if a.id != agent.id]
    if not others:
        return set()
    hit = kernels.within_radius([agent.position], [a.position for a in others], rng_m)[0]
    return {others[k].id for k in np.flatnonzero(hit)}


def positions(agents: Sequence[Agent]) -> np.ndarray:
    return np.array([(a.x, a.y) for a in agents], dtype=np.float64).reshape(-1, 2)
