"""Knowledge exchange, per-hop tree propagation and operator messages.

Message accounting per timestep:

* a pairwise exchange between agents in communication range costs 2
  intra-swarm messages (one each way), whether or not anything changed;
* each tree edge carries at most one membership push (only when the
  child's follower list changed) and one observation report (only when
  its subtree observed something);
* a root that sees its follower list shrink broadcasts the removal down
  the tree, one hop per timestep, one message per edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .forest import Forest
from .swarm import Agent, Mode


@dataclass(frozen=True)
class OperatorMessage:
    sender: int
    timestep: float
    # (event id, x, y, remaining budget, still active)
    events: tuple

    def __post_init__(self):
        if not self.events:
            raise ValueError("operator messages must carry at least one event")


@dataclass
class MessageTally:
    operator_msgs_this_step: int = 0
    intra_swarm_msgs_this_step: int = 0
    exchanges: int = 0
    tree_pushes: int = 0
    broadcasts: int = 0

    def recount(self) -> int:
        return 2 * self.exchanges + self.tree_pushes + self.broadcasts


def exchange_knowledge(a: Agent, b: Agent) -> int:
    """Merge two agents' event beliefs (completion wins) and return the message cost."""
    if a.known_active != b.known_active or a.known_done != b.known_done:
        done = a.known_done | b.known_done
        active = (a.known_active | b.known_active) - done
        for ag in (a, b):
            if ag.known_active != active:
                ag.knowledge_changed = True
            ag.known_active = set(active)
            ag.known_done = set(done)
    return 2


def exchange_round(agents: Sequence[Agent], pairs) -> int:
    """All pairwise exchanges of one timestep, against the knowledge held at its start.

    Information therefore travels one hop per timestep whatever the pair
    order. Returns the message cost (2 per pair).
    """
    if not pairs:
        return 0
    snap = {}
    for i, j in pairs:
        for k in (i, j):
            if k not in snap:
                a = agents[k]
                snap[k] = (frozenset(a.known_active), frozenset(a.known_done))
    heard = {}
    for i, j in pairs:
        heard.setdefault(i, []).append(snap[j])
        heard.setdefault(j, []).append(snap[i])
    for k, msgs in heard.items():
        a = agents[k]
        done = set(a.known_done)
        active = set(a.known_active)
        for act, dn in msgs:
            done |= dn
            active |= act
        active -= done
        if active != a.known_active:
            a.knowledge_changed = True
        a.known_active = active
        a.known_done = done
    return 2 * len(pairs)


def propagate_up(forest: Forest, sensed: Mapping[int, Iterable[int]]) -> tuple[int, int]:
    """Advance tree information by one hop.

    Each settled member rebuilds its follower list from the membership
    pushes its children sent last step and its observation report from its
    own sensing plus its children's previous reports, then pushes both one
    hop up. Returns ``(push_messages, broadcast_messages)``.
    """
    nodes = forest.nodes
    order = sorted(a for a, n in nodes.items() if not n.relocating)
    new_obs = {}
    new_followers = {}
    for aid in order:
        node = nodes[aid]
        obs = set(sensed.get(aid, ()))
        followers = set()
        for c in node.children:
            obs |= nodes[c].obs_report
            followers |= node.child_members.get(c, frozenset())
        new_obs[aid] = frozenset(obs)
        new_followers[aid] = followers

    pushes = 0
    for aid in order:
        node = nodes[aid]
        node.obs_report = new_obs[aid]
        departed = node.followers - new_followers[aid]
        node.followers = new_followers[aid]
        for d in departed:
            node.scores.pop(d, None)
        if node.parent is None:
            if departed:
                node.notice |= departed
            continue
        if node.obs_report:
            pushes += 1
        mine = frozenset(node.followers | {aid})
        if mine != node.pushed_members:
            nodes[node.parent].child_members[aid] = mine
            node.pushed_members = mine
            pushes += 1

    broadcasts = 0
    outgoing = [(aid, nodes[aid].notice) for aid in order if nodes[aid].notice]
    for aid, notice in outgoing:
        nodes[aid].notice = set()
        for c in sorted(nodes[aid].children):
            child = nodes[c]
            child.followers -= notice
            for d in notice:
                child.scores.pop(d, None)
            child.notice |= notice
            broadcasts += 1
    return pushes, broadcasts


def root_view(forest: Forest, root: int) -> frozenset:
    """Events the root currently believes its tree is observing."""
    return forest.nodes[root].obs_report


def emit_operator_messages(agents: Sequence[Agent], forest: Forest, t: float,
                           event_info) -> list[OperatorMessage]:
    """One message per observing free agent and one per root with a non-empty view.

    ``event_info(eid)`` returns ``(x, y, budget_remaining, active)``.
    """
    out = []
    for a in agents:
        if a.mode is Mode.OBSERVING_EVENT and a.target_event is not None:
            out.append(OperatorMessage(a.id, t, ((a.target_event, *event_info(a.target_event)),)))
        elif a.mode is Mode.ROOT:
            view = root_view(forest, a.id)
            if view:
                out.append(OperatorMessage(a.id, t, tuple((e, *event_info(e)) for e in sorted(view))))
    return out
