import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hybridswarm import metrics
from hybridswarm.metrics import RunRecord
from hybridswarm.swarm import Agent, Mode
from hybridswarm.world import Environment

ENV = Environment()


def rec(waits, ts=None, seed=0, fp="f"):
    events = [(i, 0.0, 0.0, 0.0, None if w is None else w, None, w) for i, w in enumerate(waits)]
    if ts is None:
        ts = np.zeros((0, 6))
    return RunRecord(events, np.asarray(ts, dtype=float), fp, seed)


def test_median_iqr_examples():
    s = metrics.waiting_time_summary([rec([10]), rec([20]), rec([30])])
    assert s["median"] == 20 and s["iqr"] == 10
    one = metrics.waiting_time_summary([rec([4, 6])])
    assert one["median"] == 5 and one["iqr"] == 0


def test_summary_matches_order_statistics_oracle():
    rng = np.random.default_rng(0)
    means = list(rng.gamma(4.0, 8.0, size=20))
    s = metrics.waiting_time_summary([rec([m]) for m in means])
    assert s["median"] == pytest.approx(oracles.percentile_linear(means, 50), rel=1e-12)
    q1, q3 = oracles.percentile_linear(means, 25), oracles.percentile_linear(means, 75)
    assert s["iqr"] == pytest.approx(q3 - q1, rel=1e-12)


def test_replicates_without_observations_are_excluded(caplog):
    s = metrics.waiting_time_summary([rec([None]), rec([3.0])])
    assert s["median"] == 3.0 and s["excluded"] == 1
    assert "excluded" in caplog.text


def test_censored_count():
    assert rec([None, 2.0, None]).censored() == 2


def test_agents_in_trees_examples():
    assert metrics.agents_in_trees([Agent(i, 0, 0) for i in range(5)]) == 0
    tree = [Agent(0, 0, 0, mode=Mode.ROOT)] + [Agent(i, 0, 0, mode=Mode.TREE_MEMBER) for i in range(1, 5)]
    assert metrics.agents_in_trees(tree) == 5


@given(modes=st.lists(st.sampled_from(list(Mode)), max_size=30))
def test_agents_in_trees_matches_mode_scan(modes):
    agents = [Agent(i, 0, 0, mode=m) for i, m in enumerate(modes)]
    want = sum(1 for m in modes if m.name in ("ROOT", "TREE_MEMBER", "RELOCATING"))
    assert metrics.agents_in_trees(agents) == want


def test_single_disc_coverage_is_near_analytic():
    c = metrics.coverage([(50.0, 50.0)], 5.0, ENV)
    assert 69 <= c <= 89
    assert abs(c - math.pi * 25) <= 2 * math.pi * 5 * 1.0  # one cell band around the rim


@given(x=st.floats(5, 95), y=st.floats(5, 95))
def test_coverage_within_one_cell_band(x, y):
    c = metrics.coverage([(x, y)], 5.0, ENV)
    inner = math.pi * (5 - math.sqrt(0.5)) ** 2
    outer = math.pi * (5 + math.sqrt(0.5)) ** 2
    assert inner <= c <= outer


def test_colocated_discs_count_once():
    assert metrics.coverage([(50, 50), (50, 50)], 5.0, ENV) == metrics.coverage([(50, 50)], 5.0, ENV)


def test_twelve_separate_discs_under_upper_bound():
    pts = [(10 + 20 * (i % 4), 15 + 30 * (i // 4)) for i in range(12)]
    c = metrics.coverage(pts, 5.0, ENV)
    assert c <= 942 + 12 * 2 * math.pi * 5
    assert c == 12 * metrics.coverage([pts[0]], 5.0, ENV)


def test_coverage_matches_cell_oracle():
    rng = np.random.default_rng(1)
    pts = [tuple(p) for p in rng.uniform(0, 30, (6, 2))]
    env = Environment(width=30, height=30)
    assert metrics.coverage(pts, 5.0, env) == oracles.union_cells(pts, 5.0, 30, 30, 1.0)


def _ts(op, intra):
    T = len(op)
    return np.column_stack([np.arange(T), op, intra, np.zeros(T), np.zeros(T), np.zeros(T)])


def test_message_rate_examples():
    zero = metrics.message_rates([rec([], _ts([0] * 10, [0] * 10))])
    assert (zero["operator_mean"], zero["intra_mean"]) == (0.0, 0.0)
    five = metrics.message_rates([rec([], _ts([5] * 50, [2] * 50))])
    assert five["operator_mean"] == 5.0 and five["intra_mean"] == 2.0


def test_message_rates_match_hand_counts():
    a = rec([], _ts([1, 2, 3, 4], [10, 0, 0, 10]))
    b = rec([], _ts([0, 0, 0, 4], [4, 4, 4, 4]))
    m = metrics.message_rates([a, b])
    assert m["points"] == [(2.5, 5.0), (1.0, 4.0)]
    assert m["operator_mean"] == 1.75 and m["intra_mean"] == 4.5
    assert m["operator_std"] == pytest.approx(0.75)


def test_plateau_of_a_step_function():
    x = np.r_[np.linspace(0, 12, 1000), np.full(8000, 12.0)]
    p = metrics.plateau_stats(x)
    assert p["level"] == 12.0 and p["max_rolling_std"] == 0.0
    assert 900 <= p["time_to_plateau"] <= 1500


def test_plateau_rejects_oscillation():
    t = np.arange(9000)
    p = metrics.plateau_stats(10 + 5 * np.sign(np.sin(t / 50)))
    assert p["relative_std"] > 0.1


def test_later_rise_reaches_plateau_later():
    early = np.r_[np.linspace(0, 10, 500), np.full(8500, 10.0)]
    late = np.r_[np.linspace(0, 10, 5000), np.full(4000, 10.0)]
    assert metrics.plateau_stats(early)["time_to_plateau"] < metrics.plateau_stats(late)["time_to_plateau"]


@given(st.lists(st.integers(-5, 5), min_size=3, max_size=12),
       st.lists(st.integers(-5, 5), min_size=3, max_size=12))
def test_spearman_matches_rank_oracle(x, y):
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    got = metrics.spearman(x, y)
    if len(set(x)) == 1 or len(set(y)) == 1:
        assert got == 0.0
    else:
        assert got == pytest.approx(oracles.spearman(x, y), abs=1e-9)


def test_spearman_monotone():
    assert metrics.spearman([3, 4, 5, 6], [1, 2, 9, 10]) == pytest.approx(1.0)
    assert metrics.spearman([3, 4, 5, 6], [9, 5, 2, 1]) == pytest.approx(-1.0)
