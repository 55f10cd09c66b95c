"""The per-replicate tick loop."""
from __future__ import annotations

import hashlib
import math
from typing import Optional

import numpy as np

from . import comms, forest as fo, kernels, metrics
from .config import ExperimentConfig
from .forest import Forest, PolicyKind
from .swarm import Agent, Mode, move_towards, positions, random_walk_step
from .world import EventField


class Simulation:
    """One seeded replicate.

    Each tick reads a snapshot of positions and events, decides every
    agent's behaviour against that snapshot, and only then commits motion,
    so the order in which agents are visited cannot change the outcome of
    sensing, joining or messaging.

    The event stream and the agents draw from separate generators spawned
    from ``seed``; policies run with the same seed therefore face the same
    sequence of events.
    """

    def __init__(self, config: ExperimentConfig, seed: int, debug: bool = False,
                 trace: bool = False, log_messages: bool = False):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.debug = debug
        self.env = config.world
        self.policy = config.policy
        self.sr = config.sensing.sensing_range
        self.cr = config.sensing.comm_range
        self.dt = config.dt
        world_ss, swarm_ss = np.random.SeedSequence(self.seed).spawn(2)
        self.events = EventField(self.env, np.random.default_rng(world_ss))
        self.rng = np.random.default_rng(swarm_ss)
        start = self.rng.uniform((0.0, 0.0), (self.env.width, self.env.height),
                                 size=(config.n_agents, 2))
        self.agents = [Agent(i, float(x), float(y)) for i, (x, y) in enumerate(start)]
        self.by_id = {a.id: a for a in self.agents}
        self.forest = Forest()
        self.t = 0.0
        self.steps = 0
        n_steps = int(math.ceil(config.duration / config.dt - 1e-9))
        self.timeseries = np.zeros((n_steps, len(metrics.TIMESERIES_FIELDS)))
        self._cov_version = -1
        self._cov_value = 0.0
        self.tally = comms.MessageTally()
        self.trace = [] if trace else None
        self.messages = [] if log_messages else None
        self.max_sensed = 0
        self.relocations = 0

    # -- helpers -----------------------------------------------------------
    def locate(self, eid: int):
        return self.events.location(eid)

    def event_info(self, eid: int):
        ev = self.events.registry[eid]
        return (ev.x, ev.y, ev.budget_remaining, ev.completed_at is None)

    def _coverage(self) -> float:
        if self.forest.version != self._cov_version:
            pts = [self.by_id[a].position for a, n in self.forest.nodes.items() if not n.relocating]
            self._cov_value = metrics.coverage(pts, self.sr, self.env)
            self._cov_version = self.forest.version
        return self._cov_value

    # -- tick --------------------------------------------------------------
    def step(self) -> None:
        t, dt = self.t, self.dt
        agents, forest, policy = self.agents, self.forest, self.policy
        n = len(agents)

        self.events.spawn(t, dt)
        ids, epos = self.events.snapshot()
        pos = positions(agents)
        sensed = [[] for _ in range(n)]
        observers = {}
        if ids:
            rows, cols = np.nonzero(kernels.within_radius(pos, epos, self.sr))
            for r, c in zip(rows.tolist(), cols.tolist()):
                eid = ids[c]
                sensed[r].append(eid)
                observers.setdefault(eid, []).append(r)
        active = self.events.active.keys()
        for a in agents:
            s = sensed[a.id]
            if s:
                a.learn(s)
                if len(s) > self.max_sensed:
                    self.max_sensed = len(s)
            stale = a.known_active - active
            if stale:
                seen_gone = []
                for eid in stale:
                    x, y = self.locate(eid)
                    if (x - a.x) ** 2 + (y - a.y) ** 2 <= self.sr * self.sr:
                        seen_gone.append(eid)
                if seen_gone:
                    a.forget_completed(seen_gone)

        pairs = kernels.pairs_within(pos, self.cr).tolist()
        neighbours = [[] for _ in range(n)]
        for i, j in pairs:
            neighbours[i].append(j)
            neighbours[j].append(i)

        # policy step against the snapshot
        parents = [self.by_id[a] for a, nd in sorted(forest.nodes.items()) if not nd.relocating]
        chases = policy.chases_events
        for a in agents:
            if not a.is_free:
                continue
            helper = None
            if chases and a.mode is Mode.FREE_ROAMING and not a.known_active:
                for j in sorted(neighbours[a.id]):
                    b = agents[j]
                    if b.mode is Mode.OBSERVING_EVENT and b.target_event is not None:
                        helper = b.target_event
                        break
            fo.free_agent_step(a, sensed[a.id], policy, forest, parents, self.cr,
                               self.locate, t, helper)

        if policy.kind is not PolicyKind.DECENTRALISED:
            if policy.active_recruitment_enabled:
                self._recruit(t)
            if policy.dissolution_enabled:
                self._dissolve(sensed, t)

        # motion commit
        for a in agents:
            mode = a.mode
            if mode is Mode.FREE_ROAMING:
                random_walk_step(a, self.env, dt, self.rng, self.config.walk_leg)
            elif mode is Mode.MOVING_TO_EVENT:
                if move_towards(a, self.locate(a.target_event), dt):
                    a.mode = Mode.OBSERVING_EVENT
            elif mode is Mode.RELOCATING:
                if move_towards(a, a.target_point, dt):
                    settled = [self.by_id[b] for b, nd in sorted(forest.nodes.items())
                               if not nd.relocating]
                    fo.finish_relocation(a, settled, forest, policy, self.cr, t)
                    if a.mode is Mode.FREE_ROAMING:
                        a.join_blocked_until = t + policy.rejoin_cooldown

        # communication
        comms.exchange_round(agents, pairs)
        if forest.nodes:
            tree_sensed = {aid: sensed[aid] for aid in forest.nodes}
            pushes, broadcasts = comms.propagate_up(forest, tree_sensed)
        else:
            pushes = broadcasts = 0
        if self.messages is not None:
            msgs = comms.emit_operator_messages(agents, forest, t, self.event_info)
            self.messages.extend(msgs)
            n_op = len(msgs)
        else:
            n_op = self._count_operator_messages()
        tally = self.tally
        tally.exchanges = len(pairs)
        tally.tree_pushes = pushes
        tally.broadcasts = broadcasts
        tally.operator_msgs_this_step = n_op
        tally.intra_swarm_msgs_this_step = tally.recount()

        self.events.complete(observers, dt, t)

        if self.steps < len(self.timeseries):
            self.timeseries[self.steps] = (t, n_op, tally.intra_swarm_msgs_this_step,
                                           len(forest.nodes), len(forest.trees), self._coverage())
        if self.trace is not None:
            self.trace.append(self._fingerprint_state())
        if self.debug:
            self._check(pos)
        self.t = t + dt
        self.steps += 1

    def _count_operator_messages(self) -> int:
        count = 0
        nodes = self.forest.nodes
        for a in self.agents:
            if a.mode is Mode.OBSERVING_EVENT:
                count += 1
            elif a.mode is Mode.ROOT and nodes[a.id].obs_report:
                count += 1
        return count

    def _recruit(self, t: float) -> None:
        forest, policy = self.forest, self.policy
        period = policy.recruitment_period
        for root in sorted(forest.trees):
            age = t - forest.nodes[root].joined_at
            if age <= 0 or not math.isclose(age % period, 0.0, abs_tol=1e-9):
                continue
            ra = self.by_id[root]
            known = [self.locate(e) for e in sorted(ra.known_active)]
            order = fo.active_recruitment(ra, forest, self.by_id, known, self.env, policy,
                                          self.sr, self.cr)
            if order is not None:
                fo.apply_relocation(order, self.by_id, forest)
                self.relocations += 1

    def _dissolve(self, sensed, t: float) -> None:
        forest, policy = self.forest, self.policy
        leaving = []
        for aid in sorted(forest.nodes):
            node = forest.nodes[aid]
            if node.relocating:
                continue
            observed = bool(sensed[aid])
            if node.parent is None:
                if not fo.root_dissolution_step(node, observed, t, policy, len(forest.trees[aid])):
                    leaving.append(aid)
            elif not fo.dissolution_step(node, observed, policy):
                leaving.append(aid)
        for aid in leaving:
            fo.leave_tree(self.by_id[aid], forest, policy, t)

    def _fingerprint_state(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for a in self.agents:
            h.update(f"{a.id}:{a.x!r}:{a.y!r}:{a.mode.value}:{a.target_event};".encode())
        return h.hexdigest()

    def _check(self, pos_before: np.ndarray) -> None:
        self.forest.check_invariants(self.agents)
        pos_after = positions(self.agents)
        step = np.hypot(*(pos_after - pos_before).T)
        if len(step) and step.max() > self.dt * 1.0 + 1e-9:
            raise AssertionError(f"agent exceeded max speed: {step.max()}")
        x, y = pos_after[:, 0], pos_after[:, 1]
        if ((x < 0) | (y < 0) | (x > self.env.width) | (y > self.env.height)).any():
            raise AssertionError("agent left the environment")

    def run(self) -> metrics.RunRecord:
        for _ in range(len(self.timeseries)):
            self.step()
        return self.record()

    def record(self) -> metrics.RunRecord:
        rows = []
        for ev in self.events.registry:
            rows.append((ev.id, ev.x, ev.y, ev.spawn_time, ev.first_observed_at,
                         ev.completed_at, ev.waiting_time))
        return metrics.RunRecord(
            events=rows,
            timeseries=self.timeseries[: self.steps].copy(),
            fingerprint=self.config.fingerprint(),
            seed=self.seed,
            label=self.config.label,
            meta={"max_sensed": self.max_sensed, "relocations": self.relocations},
        )


def run_replicate(config: ExperimentConfig, seed: int, debug: bool = False) -> metrics.RunRecord:
    """Run one replicate to completion; identical (config, seed) give identical records."""
    return Simulation(config, seed, debug=debug).run()
