"""Coordination policies: the self-organising tree forest and its decentralised fallback.

A tree is grown around a root that saw enough events at once. Free agents
that pass within communication range of a member (but no closer than
``d_min``) attach to it. Roots periodically move their least useful leaf
to the best reachable grid point (active recruitment). Idle members
detach again once their dissolution counter runs out, which happens
faster the deeper they sit in the tree.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .swarm import Agent, Mode
from .world import Environment


class ContractViolation(RuntimeError):
    """An operation was called on an agent in the wrong state."""


class ForestError(RuntimeError):
    """The forest structure broke one of its invariants."""


class PolicyKind(enum.Enum):
    DECENTRALISED = "decentralised"
    HIERARCHICAL = "hierarchical"
    HYBRID = "hybrid"


class Action(enum.Enum):
    FORM_ROOT = "form_root"
    JOIN = "join"
    CHASE = "chase"
    OBSERVE = "observe"
    ROAM = "roam"


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind = PolicyKind.HYBRID
    rho: int = 2
    delta: int = 3
    d_min: float = 5.0
    gamma_max: int = 600
    recruitment_period: float = 60.0
    active_recruitment_enabled: bool = True
    dissolution_enabled: bool = True
    # seconds a dissolved agent ignores tree-growth offers
    rejoin_cooldown: float = 600.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.rho < 1 or self.delta < 1:
            raise ValueError("rho and delta must be >= 1")
        if self.d_min <= 0:
            raise ValueError("d_min must be positive")
        if self.gamma_max < 1:
            raise ValueError("gamma_max must be >= 1")
        if self.recruitment_period <= 0:
            raise ValueError("recruitment_period must be positive")
        if self.rejoin_cooldown < 0:
            raise ValueError("rejoin_cooldown must be non-negative")

    @property
    def root_threshold(self) -> Optional[int]:
        if self.kind is PolicyKind.HIERARCHICAL:
            return self.rho
        if self.kind is PolicyKind.HYBRID:
            return self.delta
        return None

    @property
    def chases_events(self) -> bool:
        return self.kind is not PolicyKind.HIERARCHICAL

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.HIERARCHICAL:
            base = f"hierarchical-rho{self.rho}"
        elif self.kind is PolicyKind.HYBRID:
            base = f"hybrid-delta{self.delta}"
        else:
            base = "decentralised"
        if self.kind is not PolicyKind.DECENTRALISED:
            if not self.active_recruitment_enabled:
                base += "-noAR"
            if not self.dissolution_enabled:
                base += "-nodissolution"
        return base


@dataclass(slots=True, eq=False)
class TreeMembership:
    """Per-agent tree bookkeeping.

    ``parent``/``children``/``depth`` are the physical links. ``followers`` and
    ``scores`` are the agent's beliefs about its descendants, which lag the
    physical structure by one hop per timestep (see ``comms.propagate_up``).
    """

    root: int
    parent: Optional[int]
    depth: int
    gamma: int
    joined_at: float
    children: set = field(default_factory=set)
    followers: set = field(default_factory=set)
    scores: dict = field(default_factory=dict)
    relocating: bool = False
    last_stimulus: float = 0.0
    # comms state
    child_members: dict = field(default_factory=dict)
    pushed_members: Optional[frozenset] = None
    obs_report: frozenset = frozenset()
    notice: set = field(default_factory=set)


@dataclass(frozen=True)
class RelocationOrder:
    agent: int
    target: tuple[float, float]
    old_parent: int
    leaf_score: int
    target_score: int


class Forest:
    """The set of roots ``L`` and the membership record of every agent in a tree."""

    def __init__(self):
        self.nodes: dict[int, TreeMembership] = {}
        self.trees: dict[int, set] = {}
        self.version = 0

    @property
    def roots(self) -> set:
        return set(self.trees)

    def __contains__(self, aid) -> bool:
        return aid in self.nodes

    def is_settled(self, aid) -> bool:
        node = self.nodes.get(aid)
        return node is not None and not node.relocating

    def add_root(self, aid: int, t: float, gamma_max: int) -> TreeMembership:
        if aid in self.nodes:
            raise ContractViolation(f"agent {aid} is already in a tree")
        node = TreeMembership(root=aid, parent=None, depth=0, gamma=gamma_max,
                              joined_at=t, last_stimulus=t)
        self.nodes[aid] = node
        self.trees[aid] = {aid}
        self.version += 1
        return node

    def attach(self, aid: int, parent: int, t: float, gamma_max: int) -> TreeMembership:
        if aid in self.nodes:
            raise ContractViolation(f"agent {aid} is already in a tree")
        p = self.nodes[parent]
        if p.relocating:
            raise ContractViolation(f"parent {parent} is relocating")
        node = TreeMembership(root=p.root, parent=parent, depth=p.depth + 1,
                              gamma=gamma_max, joined_at=t, last_stimulus=t)
        self.nodes[aid] = node
        p.children.add(aid)
        self.trees[p.root].add(aid)
        self.version += 1
        return node

    def _unlink(self, aid: int) -> TreeMembership:
        node = self.nodes[aid]
        if node.parent is not None:
            p = self.nodes[node.parent]
            p.children.discard(aid)
            p.child_members.pop(aid, None)
        node.parent = None
        return node

    def detach(self, aid: int) -> None:
        """Remove a childless member from its tree entirely."""
        node = self.nodes[aid]
        if node.children:
            raise ContractViolation(f"agent {aid} still has children {sorted(node.children)}")
        if node.parent is None and not node.relocating:
            raise ContractViolation(f"agent {aid} is a root; use dissolve_root")
        self._unlink(aid)
        self.trees[node.root].discard(aid)
        del self.nodes[aid]
        self.version += 1

    def dissolve_root(self, aid: int) -> None:
        if aid not in self.trees:
            raise ContractViolation(f"agent {aid} is not a root")
        if self.trees[aid] != {aid}:
            raise ContractViolation(f"root {aid} still has members")
        del self.trees[aid]
        del self.nodes[aid]
        self.version += 1

    def start_relocation(self, aid: int) -> None:
        node = self.nodes[aid]
        if node.children or node.parent is None:
            raise ContractViolation(f"only leaves can relocate (agent {aid})")
        self._unlink(aid)
        node.relocating = True
        node.pushed_members = None
        node.obs_report = frozenset()
        self.version += 1

    def finish_relocation(self, aid: int, parent: Optional[int], t: float, gamma_max: int) -> None:
        node = self.nodes[aid]
        if parent is None:
            self.trees[node.root].discard(aid)
            del self.nodes[aid]
        else:
            p = self.nodes[parent]
            node.relocating = False
            node.parent = parent
            node.depth = p.depth + 1
            node.gamma = gamma_max
            node.joined_at = t
            node.last_stimulus = t
            p.children.add(aid)
        self.version += 1

    def members(self, root: int) -> list[int]:
        return sorted(self.trees[root])

    def settled_members(self, root: int) -> list[int]:
        return [a for a in sorted(self.trees[root]) if not self.nodes[a].relocating]

    def leaves(self, root: int) -> list[int]:
        """Settled non-root members without children (``F_i`` empty)."""
        return [a for a in sorted(self.trees[root])
                if a != root and not self.nodes[a].relocating and not self.nodes[a].children]

    def in_tree_count(self) -> int:
        return len(self.nodes)

    def check_invariants(self, agents: Sequence[Agent]) -> None:
        """Raise ForestError if acyclicity, partition or mode consistency fails."""
        n = len(agents)
        seen = {}
        for root, members in self.trees.items():
            if self.nodes[root].parent is not None or self.nodes[root].root != root:
                raise ForestError(f"root {root} has a parent")
            for m in members:
                if m in seen:
                    raise ForestError(f"agent {m} in trees {seen[m]} and {root}")
                seen[m] = root
        if set(seen) != set(self.nodes):
            raise ForestError("tree member sets disagree with node table")
        for aid, node in self.nodes.items():
            if node.relocating:
                if node.parent is not None or node.children:
                    raise ForestError(f"relocating agent {aid} still linked")
                continue
            hops, cur = 0, aid
            while self.nodes[cur].parent is not None:
                parent = self.nodes[cur].parent
                if self.nodes[parent].relocating:
                    raise ForestError(f"agent {cur} has relocating parent {parent}")
                if self.nodes[parent].depth + 1 != self.nodes[cur].depth:
                    raise ForestError(f"depth mismatch at {cur}")
                if cur not in self.nodes[parent].children:
                    raise ForestError(f"{cur} missing from children of {parent}")
                cur = parent
                hops += 1
                if hops > n:
                    raise ForestError(f"cycle through agent {aid}")
            if cur != node.root or seen[aid] != cur:
                raise ForestError(f"agent {aid} reaches root {cur}, recorded {node.root}")
        for a in agents:
            in_tree = a.id in self.nodes
            if in_tree != (a.mode in (Mode.TREE_MEMBER, Mode.ROOT, Mode.RELOCATING)):
                raise ForestError(f"agent {a.id} mode {a.mode} disagrees with membership")
            if a.mode is Mode.ROOT and a.id not in self.trees:
                raise ForestError(f"agent {a.id} in ROOT mode is not in L")


# -- operations ---------------------------------------------------------------

def maybe_form_root(agent: Agent, sensed: Iterable[int], policy: PolicyConfig,
                    forest: Forest, t: float = 0.0) -> bool:
    if not agent.is_free:
        raise ContractViolation(f"agent {agent.id} is not free (mode {agent.mode})")
    theta = policy.root_threshold
    if theta is None or len(sensed) < theta:
        return False
    forest.add_root(agent.id, t, policy.gamma_max)
    agent.mode = Mode.ROOT
    agent.target_event = None
    agent.target_point = None
    agent.queue.clear()
    return True


def choose_parent(agent: Agent, members: Sequence[Agent], d_min: float,
                  comm_range: float) -> Optional[int]:
    """Nearest member in the annulus ``d_min <= d <= comm_range``; ties to the lowest id."""
    lo2, hi2 = d_min * d_min, comm_range * comm_range
    best, best_d2 = None, math.inf
    for m in members:
        if m.id == agent.id:
            continue
        dx = m.x - agent.x
        dy = m.y - agent.y
        d2 = dx * dx + dy * dy
        if lo2 <= d2 <= hi2 and (d2 < best_d2 or (d2 == best_d2 and m.id < best)):
            best, best_d2 = m.id, d2
    return best


def try_join_tree(agent: Agent, members: Sequence[Agent], forest: Forest,
                  policy: PolicyConfig, comm_range: float, t: float = 0.0) -> Optional[int]:
    """Attach a free agent to the nearest settled tree member in its annulus.

    ``members`` are the candidate parents (settled roots and members).
    Returns the new parent's id, or None.
    """
    if not agent.is_free:
        raise ContractViolation(f"agent {agent.id} is not free")
    if t < agent.join_blocked_until:
        return None
    parent = choose_parent(agent, members, policy.d_min, comm_range)
    if parent is None:
        return None
    forest.attach(agent.id, parent, t, policy.gamma_max)
    agent.mode = Mode.TREE_MEMBER
    agent.target_event = None
    agent.target_point = None
    agent.queue.clear()
    return parent


def leaf_score(position, event_positions, sensing_range: float) -> int:
    """Known active events within sensing range of ``position``."""
    if len(event_positions) == 0:
        return 0
    return int(kernels.count_within([position], event_positions, sensing_range)[0])


def candidate_targets(env: Environment, anchors: np.ndarray, d_min: float,
                      comm_range: float) -> np.ndarray:
    """Grid points within ``comm_range`` of some anchor and at least ``d_min`` from all of them."""
    grid = env.grid_points
    if len(anchors) == 0:
        return grid[:0]
    lo = anchors.min(axis=0) - comm_range
    hi = anchors.max(axis=0) + comm_range
    box = ((grid[:, 0] >= lo[0]) & (grid[:, 0] <= hi[0])
           & (grid[:, 1] >= lo[1]) & (grid[:, 1] <= hi[1]))
    pts = np.ascontiguousarray(grid[box])
    return pts[kernels.annulus_mask(pts, anchors, d_min, comm_range)]


def active_recruitment(root: Agent, forest: Forest, agents: Mapping[int, Agent],
                       known_positions, env: Environment, policy: PolicyConfig,
                       sensing_range: float, comm_range: float) -> Optional[RelocationOrder]:
    """Pick the weakest leaf and the best reachable grid point; order a move on strict gain.

    ``known_positions`` are the locations of the events the root believes
    active. Scores of all settled descendants are refreshed into the root's
    ``scores`` as a side effect.
    """
    if root.mode is not Mode.ROOT:
        raise ContractViolation(f"agent {root.id} is not a root")
    rnode = forest.nodes[root.id]
    known = kernels.as_points(known_positions)
    settled = forest.settled_members(root.id)
    desc = [a for a in settled if a != root.id]
    if desc:
        s = kernels.count_within([agents[a].position for a in desc], known, sensing_range)
        rnode.scores = {a: int(v) for a, v in zip(desc, s)}
    else:
        rnode.scores = {}
    leaves = forest.leaves(root.id)
    if not leaves:
        return None
    leaf = min(leaves, key=lambda a: (rnode.scores[a], a))
    worst = rnode.scores[leaf]
    anchors = []
    for a in forest.members(root.id):
        if a == leaf:
            continue
        ag = agents[a]
        if forest.nodes[a].relocating and ag.target_point is not None:
            anchors.append(ag.target_point)
        else:
            anchors.append(ag.position)
    cands = candidate_targets(env, kernels.as_points(anchors), policy.d_min, comm_range)
    if len(cands) == 0 or len(known) == 0:
        return None
    scores = kernels.count_within(cands, known, sensing_range)
    k = int(np.argmax(scores))  # first maximum: grid is ordered by x, then y
    if scores[k] <= worst:
        return None
    return RelocationOrder(leaf, (float(cands[k, 0]), float(cands[k, 1])),
                           forest.nodes[leaf].parent, worst, int(scores[k]))


def apply_relocation(order: RelocationOrder, agents: Mapping[int, Agent], forest: Forest) -> None:
    forest.start_relocation(order.agent)
    a = agents[order.agent]
    a.mode = Mode.RELOCATING
    a.target_point = order.target


def finish_relocation(agent: Agent, members: Sequence[Agent], forest: Forest,
                      policy: PolicyConfig, comm_range: float, t: float) -> Optional[int]:
    """Re-parent an arrived recruit inside its own tree, or release it if nothing is in reach."""
    node = forest.nodes[agent.id]
    own = [m for m in members if forest.nodes.get(m.id) is not None
           and forest.nodes[m.id].root == node.root]
    parent = choose_parent(agent, own, policy.d_min, comm_range)
    forest.finish_relocation(agent.id, parent, t, policy.gamma_max)
    agent.target_point = None
    if parent is None:
        agent.mode = Mode.FREE_ROAMING
        agent.walk_timer = 0.0
    else:
        agent.mode = Mode.TREE_MEMBER
    return parent


def dissolution_step(node: TreeMembership, observed_any: bool, policy: PolicyConfig) -> bool:
    """Reset or decay ``gamma``; False means the member should leave now.

    A member whose counter is exhausted but which still has children keeps
    relaying for them at ``gamma == 0`` and leaves once it is a leaf.
    """
    if observed_any:
        node.gamma = policy.gamma_max
        return True
    node.gamma = max(0, node.gamma - node.depth)
    if node.gamma > 0:
        return True
    return bool(node.children)


def root_dissolution_step(node: TreeMembership, observed_any: bool, t: float,
                          policy: PolicyConfig, tree_size: int) -> bool:
    """A root stays while it has members or sensed something in the last ``gamma_max`` seconds."""
    if observed_any:
        node.last_stimulus = t
        return True
    if tree_size > 1:
        return True
    return t - node.last_stimulus < policy.gamma_max


def leave_tree(agent: Agent, forest: Forest, policy: PolicyConfig, t: float) -> None:
    if agent.mode is Mode.ROOT:
        forest.dissolve_root(agent.id)
    else:
        forest.detach(agent.id)
    agent.mode = Mode.FREE_ROAMING
    agent.walk_timer = 0.0
    agent.target_point = None
    agent.join_blocked_until = t + policy.rejoin_cooldown


def nearest_known(agent: Agent, locate: Callable[[int], tuple], pool=None) -> Optional[int]:
    best, best_d2 = None, math.inf
    for eid in (agent.known_active if pool is None else pool):
        x, y = locate(eid)
        d2 = (x - agent.x) ** 2 + (y - agent.y) ** 2
        if d2 < best_d2 or (d2 == best_d2 and eid < best):
            best, best_d2 = eid, d2
    return best


def decentralised_behaviour(agent: Agent, sensed: Iterable[int], locate: Callable[[int], tuple],
                            helper_event: Optional[int] = None, sensed_only: bool = False) -> Action:
    """Chase the nearest known event, observe it to completion, then move on.

    ``helper_event`` is the event of an observing agent within communication
    range, used when the agent knows of nothing else to do.
    """
    if agent.mode is Mode.OBSERVING_EVENT:
        if agent.target_event in agent.known_active:
            for e in sorted(sensed):
                if e != agent.target_event and e not in agent.queue:
                    agent.queue.append(e)
            return Action.OBSERVE
        agent.target_event = None
        while agent.queue:
            nxt = agent.queue.pop(0)
            if nxt in agent.known_active:
                agent.mode = Mode.MOVING_TO_EVENT
                agent.target_event = nxt
                agent.knowledge_changed = False
                return Action.CHASE
    elif (agent.mode is Mode.MOVING_TO_EVENT and not agent.knowledge_changed
          and agent.target_event in agent.known_active):
        return Action.CHASE
    target = nearest_known(agent, locate,
                           [e for e in sensed if e in agent.known_active] if sensed_only else None)
    if target is None and helper_event is not None and helper_event not in agent.known_done:
        agent.learn([helper_event])
        target = helper_event
    agent.knowledge_changed = False
    if target is None:
        agent.mode = Mode.FREE_ROAMING
        agent.target_event = None
        return Action.ROAM
    agent.mode = Mode.MOVING_TO_EVENT
    agent.target_event = target
    return Action.CHASE


def hybrid_or_decentralised_step(agent: Agent, sensed, policy: PolicyConfig, forest: Forest,
                                 locate: Callable[[int], tuple], t: float = 0.0,
                                 helper_event: Optional[int] = None,
                                 may_root: bool = True) -> Action:
    """Behaviour of a free agent that did not join a tree this step."""
    if not agent.is_free:
        raise ContractViolation(f"agent {agent.id} is not free")
    if may_root and maybe_form_root(agent, sensed, policy, forest, t):
        return Action.FORM_ROOT
    if not policy.chases_events:
        agent.mode = Mode.FREE_ROAMING
        agent.target_event = None
        agent.queue.clear()
        return Action.ROAM
    return decentralised_behaviour(agent, sensed, locate, helper_event, sensed_only=True)


def free_agent_step(agent: Agent, sensed, policy: PolicyConfig, forest: Forest,
                    members: Sequence[Agent], comm_range: float, locate: Callable[[int], tuple],
                    t: float = 0.0, helper_event: Optional[int] = None) -> Action:
    """Root formation, then tree growth, then the policy's fallback behaviour.

    No new root forms within radio range of an existing tree; such an agent
    is expected to join that tree instead.
    """
    may_root = not any((m.x - agent.x) ** 2 + (m.y - agent.y) ** 2 <= comm_range * comm_range
                       for m in members)
    if may_root and maybe_form_root(agent, sensed, policy, forest, t):
        return Action.FORM_ROOT
    if policy.kind is not PolicyKind.DECENTRALISED and members:
        if try_join_tree(agent, members, forest, policy, comm_range, t) is not None:
            return Action.JOIN
    return hybrid_or_decentralised_step(agent, sensed, policy, forest, locate, t, helper_event,
                                        may_root)


def tree_observation_set(forest: Forest, root: int, sensed: Mapping[int, Iterable[int]]) -> set:
    """Union of what the settled members of ``root``'s tree sense right now."""
    out = set()
    for a in forest.settled_members(root):
        out.update(sensed.get(a, ()))
    return out
