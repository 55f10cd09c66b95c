import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hybridswarm import forest as fo
from hybridswarm.config import from_flat
from hybridswarm.forest import (Forest, PolicyConfig, PolicyKind, active_recruitment,
                                choose_parent, dissolution_step, leaf_score, maybe_form_root,
                                tree_observation_set, try_join_tree)
from hybridswarm.sim import Simulation
from hybridswarm.swarm import Agent, Mode
from hybridswarm.world import Environment, Event

HYB = PolicyConfig(kind=PolicyKind.HYBRID, delta=3)
HIER = PolicyConfig(kind=PolicyKind.HIERARCHICAL, rho=2)
DEC = PolicyConfig(kind=PolicyKind.DECENTRALISED)


# -- root formation ------------------------------------------------------------

def test_root_formed_at_threshold():
    f = Forest()
    a = Agent(0, 1, 1)
    assert maybe_form_root(a, [1, 2, 3], HYB, f)
    assert a.mode is Mode.ROOT and f.roots == {0}


def test_no_root_below_threshold():
    f = Forest()
    a = Agent(0, 1, 1)
    assert not maybe_form_root(a, [1, 2], HYB, f)
    assert a.mode is Mode.FREE_ROAMING and not f.nodes


@pytest.mark.parametrize("policy", [HYB, HIER, DEC, PolicyConfig(delta=1)])
def test_nothing_sensed_never_forms_root(policy):
    assert not maybe_form_root(Agent(0, 1, 1), [], policy, Forest())


def test_delta_one_is_maximally_eager():
    assert maybe_form_root(Agent(0, 1, 1), [7], PolicyConfig(delta=1), Forest())


def test_decentralised_never_forms_roots():
    assert not maybe_form_root(Agent(0, 1, 1), list(range(50)), DEC, Forest())


@given(sensed=st.lists(st.integers(0, 100), unique=True, max_size=12), k=st.integers(1, 10))
def test_policy_nesting(sensed, k):
    a, b = Agent(0, 0, 0), Agent(0, 0, 0)
    got_h = maybe_form_root(a, sensed, PolicyConfig(kind=PolicyKind.HIERARCHICAL, rho=k), Forest())
    got_y = maybe_form_root(b, sensed, PolicyConfig(kind=PolicyKind.HYBRID, delta=k), Forest())
    assert got_h == got_y == (len(sensed) >= k)


# -- tree growth ---------------------------------------------------------------

def _tree(*members):
    """Forest with a root at members[0] and every other member attached to it."""
    f = Forest()
    agents = [Agent(i, x, y) for i, (x, y) in enumerate(members)]
    f.add_root(0, 0.0, 600)
    agents[0].mode = Mode.ROOT
    for a in agents[1:]:
        f.attach(a.id, 0, 0.0, 600)
        a.mode = Mode.TREE_MEMBER
    return f, agents


def test_join_unique_candidate():
    f, members = _tree((50, 50))
    newcomer = Agent(9, 57, 50)
    assert try_join_tree(newcomer, members, f, HYB, 10.0) == 0
    assert newcomer.mode is Mode.TREE_MEMBER and f.nodes[9].depth == 1


def test_join_refused_inside_d_min():
    f, members = _tree((50, 50))
    assert try_join_tree(Agent(9, 53, 50), members, f, HYB, 10.0) is None


def test_join_picks_nearest_candidate():
    f, members = _tree((50, 50), (50, 58))
    newcomer = Agent(9, 56, 50)  # 6 m from agent 0, 10 m from agent 1
    assert try_join_tree(newcomer, members, f, HYB, 10.0) == 0


@given(ms=st.lists(st.tuples(st.floats(0, 30), st.floats(0, 30)), min_size=1, max_size=8),
       p=st.tuples(st.floats(0, 30), st.floats(0, 30)))
def test_choose_parent_matches_exhaustive_scan(ms, p):
    members = [Agent(i, x, y) for i, (x, y) in enumerate(ms)]
    a = Agent(99, *p)
    want, best = None, math.inf
    for m in members:
        d2 = (m.x - a.x) ** 2 + (m.y - a.y) ** 2
        if 25.0 <= d2 <= 100.0 and d2 < best:
            want, best = m.id, d2
    got = choose_parent(a, members, 5.0, 10.0)
    assert got == want
    if got is not None:
        d = math.dist(members[got].position, a.position)
        assert 5.0 - 1e-9 <= d <= 10.0 + 1e-9


def test_join_cooldown_blocks():
    f, members = _tree((50, 50))
    a = Agent(9, 57, 50, join_blocked_until=100.0)
    assert try_join_tree(a, members, f, HYB, 10.0, t=50.0) is None
    assert try_join_tree(a, members, f, HYB, 10.0, t=100.0) == 0


# -- active recruitment ----------------------------------------------------------

def test_leaf_score_examples():
    assert leaf_score((0, 0), [], 5.0) == 0
    assert leaf_score((0, 0), [(20, 20)], 5.0) == 0
    assert leaf_score((10, 10), [(10, 12), (13, 10), (10, 6), (20, 20)], 5.0) == 3


def test_recruitment_targets_the_exhaustive_best_point():
    env = Environment()
    f, agents = _tree((50, 50), (57, 50))
    by_id = {a.id: a for a in agents}
    events = [(50, 60), (51, 61), (49, 60), (50, 62), (52, 59)]
    order = active_recruitment(agents[0], f, by_id, events, env, HYB, 5.0, 10.0)
    want, want_score = oracles.best_recruit_target(100, 100, 1.0, [(50, 50)], 5.0, 10.0, events, 5.0)
    assert order is not None
    assert order.agent == 1 and order.leaf_score == 0
    assert order.target == want and order.target_score == want_score == 5
    # the target's score is what a leaf standing there would score
    assert leaf_score(order.target, events, 5.0) == order.target_score


def test_no_recruitment_without_strict_gain():
    env = Environment()
    f, agents = _tree((50, 50), (57, 50))
    by_id = {a.id: a for a in agents}
    events = [(57, 50)]  # the leaf already covers the only event
    assert active_recruitment(agents[0], f, by_id, events, env, HYB, 5.0, 10.0) is None


def test_no_recruitment_for_lone_root():
    env = Environment()
    f, agents = _tree((50, 50))
    assert active_recruitment(agents[0], f, {0: agents[0]}, [(55, 55)], env, HYB, 5.0, 10.0) is None


def test_recruitment_only_moves_leaves():
    env = Environment()
    f = Forest()
    agents = {0: Agent(0, 50, 50, mode=Mode.ROOT), 1: Agent(1, 57, 50, mode=Mode.TREE_MEMBER),
              2: Agent(2, 64, 50, mode=Mode.TREE_MEMBER)}
    f.add_root(0, 0, 600)
    f.attach(1, 0, 0, 600)
    f.attach(2, 1, 0, 600)
    order = active_recruitment(agents[0], f, agents, [(40, 50), (41, 51)], env, HYB, 5.0, 10.0)
    assert order is not None and order.agent == 2 and not f.nodes[2].children
    fo.apply_relocation(order, agents, f)
    assert agents[2].mode is Mode.RELOCATING and 2 not in f.nodes[1].children
    f.check_invariants(list(agents.values()))


# -- dissolution -----------------------------------------------------------------

def _ticks_to_dissolve(depth, gamma_max=600):
    node = fo.TreeMembership(root=0, parent=0, depth=depth, gamma=gamma_max, joined_at=0)
    pol = PolicyConfig(gamma_max=gamma_max)
    t = 0
    while True:
        t += 1
        if not dissolution_step(node, False, pol):
            return t


def test_depth_three_dissolves_after_200():
    assert _ticks_to_dissolve(3) == 200


@given(depth=st.integers(1, 30), gmax=st.integers(1, 2000))
def test_dissolution_time_matches_oracle(depth, gmax):
    got = _ticks_to_dissolve(depth, gmax)
    assert got == oracles.dissolution_ticks(gmax, depth) == math.ceil(gmax / depth)


def test_deeper_members_dissolve_first():
    assert _ticks_to_dissolve(4) < _ticks_to_dissolve(1)


def test_constant_stimulus_pins_gamma():
    node = fo.TreeMembership(root=0, parent=0, depth=5, gamma=600, joined_at=0)
    for _ in range(5000):
        assert dissolution_step(node, True, PolicyConfig())
        assert node.gamma == 600


@given(stims=st.lists(st.booleans(), max_size=300), depth=st.integers(1, 8))
def test_gamma_only_rises_on_stimulus(stims, depth):
    node = fo.TreeMembership(root=0, parent=0, depth=depth, gamma=600, joined_at=0, children={1})
    prev = node.gamma
    for s in stims:
        dissolution_step(node, s, PolicyConfig())
        if not s:
            assert node.gamma <= prev
        prev = node.gamma


# -- observation sets ------------------------------------------------------------

def test_tree_observation_set_examples():
    f, _ = _tree((50, 50), (57, 50), (43, 50), (50, 57), (50, 43))
    assert tree_observation_set(f, 0, {}) == set()
    assert tree_observation_set(f, 0, {1: [7], 2: [7]}) == {7}
    sensed = {i: [2 * i, 2 * i + 1] for i in range(5)}
    want = set().union(*sensed.values())
    assert tree_observation_set(f, 0, sensed) == want and len(want) == 10


# -- behaviour in a running simulation -------------------------------------------

def _sim(policy, agents=1, **flat):
    cfg = from_flat({"policy": policy, "agents": agents, "event_rate": 0.0, "duration": 400, **flat})
    return Simulation(cfg, 0, debug=True)


def _inject(sim, x, y):
    ev = Event(len(sim.events.registry), x, y, sim.t)
    sim.events.registry.append(ev)
    sim.events.active[ev.id] = ev
    sim.events._positions = None
    return ev


def test_decentralised_chases_then_observes_to_completion():
    sim = _sim("decentralised")
    a = sim.agents[0]
    a.x, a.y = 2.0, 2.0
    ev = _inject(sim, 5.0, 6.0)
    path = []
    while ev.completed_at is None and sim.steps < 400:
        sim.step()
        path.append((a.x, a.y, a.mode))
    # straight-line approach: every point on the segment (2,2)->(5,6)
    for x, y, _ in path[:5]:
        assert abs((x - 2.0) * 4.0 - (y - 2.0) * 3.0) < 1e-9
    assert path[4][:2] == (5.0, 6.0)
    observing = [m for _, _, m in path if m is Mode.OBSERVING_EVENT]
    assert len(observing) >= 190
    assert ev.completed_at is not None
    sim.step()
    assert a.mode is Mode.FREE_ROAMING


def test_unreachable_delta_is_trace_equivalent_to_decentralised():
    flat = {"agents": 25, "duration": 1500}
    dec = Simulation(from_flat({**flat, "policy": "decentralised"}), 11, trace=True)
    hyb = Simulation(from_flat({**flat, "policy": "hybrid", "delta": 1000}), 11, trace=True)
    dec.run()
    hyb.run()
    assert hyb.max_sensed < 1000
    assert not hyb.forest.nodes
    assert dec.trace == hyb.trace


@pytest.mark.parametrize("policy,seed", [("hybrid", 1), ("hybrid", 2), ("hierarchical", 3),
                                         ("hybrid-delta1", 4)])
def test_invariants_hold_every_step(policy, seed):
    flat = {"agents": 25, "duration": 2000}
    if policy == "hybrid-delta1":
        flat.update(policy="hybrid", delta=1)
    else:
        flat["policy"] = policy
    sim = Simulation(from_flat(flat), seed, debug=True)  # checks after every tick
    rec = sim.run()
    assert rec.column("in_trees").max() > 0


def test_annulus_spacing_on_every_join():
    sim = Simulation(from_flat({"agents": 25, "duration": 2000, "policy": "hierarchical"}), 5)
    checked = 0
    for _ in range(2000):
        sim.step()
        for aid, node in sim.forest.nodes.items():
            if node.parent is not None and not node.relocating and node.joined_at == sim.t - sim.dt:
                d = math.dist(sim.by_id[aid].position, sim.by_id[node.parent].position)
                assert 5.0 - 1e-9 <= d <= 10.0 + 1e-9
                checked += 1
    assert checked > 0


def test_policy_config_rejects_bad_values():
    with pytest.raises(ValueError):
        PolicyConfig(delta=0)
    with pytest.raises(ValueError):
        PolicyConfig(gamma_max=0)
    assert dataclasses.replace(HYB, delta=5).root_threshold == 5
    assert HIER.root_threshold == 2 and DEC.root_threshold is None
