import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from debunkd.baselines import Heuristic, run_heuristic, select
from debunkd.env import MitigationConfig, MitigationEnv
from debunkd.trainer import make_streams


def obs(n, e=None, d_inf=None):
    s = np.zeros(5 * n)
    if d_inf is not None:
        s[n:2 * n] = d_inf
    if e is not None:
        s[4 * n:] = e
    return s


def test_max_inf_example():
    assert select("max_inf", obs(3, e=[3, 9, 1]), np.ones(3, bool)) == 1


def test_max_def_example():
    assert select(Heuristic.MAX_DEF, obs(3, d_inf=[0, 2, 5]), np.array([True, True, False])) == 1


def test_rnd_single_choice():
    mask = np.array([False, False, True, False])
    assert {select("rnd", obs(4), mask, seed) for seed in range(20)} == {2}


def test_ties_go_to_lowest_index():
    assert select("max_inf", obs(4, e=[1, 7, 7, 7]), np.array([True, False, True, True])) == 2


def test_all_masked():
    with pytest.raises(ValueError):
        select("max_def", obs(2), np.zeros(2, bool))


def test_unknown_policy():
    with pytest.raises(ValueError):
        select("greedy", obs(2), np.ones(2, bool))


def test_rnd_deterministic_given_seed(rng):
    mask = rng.random(30) < 0.5
    mask[0] = True
    a = [select("rnd", obs(30), mask, np.random.default_rng(5)) for _ in range(3)]
    assert len(set(a)) == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=20), st.integers(0, 2**31))
def test_max_inf_invariant_to_monotone_rescaling(e, seed):
    e = np.array(e, dtype=float)
    mask = np.random.default_rng(seed).random(len(e)) < 0.7
    mask[-1] = True
    n = len(e)
    base = select("max_inf", obs(n, e=e), mask)
    for f in (lambda v: 3 * v + 2, np.log1p, np.sqrt, lambda v: v ** 3):
        assert select("max_inf", obs(n, e=f(e)), mask) == base


def test_heuristics_respect_budget(small_graph):
    cfg = MitigationConfig(budget=12)
    for policy in ("rnd", "max_inf", "max_def"):
        for tr in run_heuristic(small_graph, cfg, policy, 3, seed=1):
            assert all(st.mask[st.action] for st in tr.steps)
            assert sum(st.cost for st in tr.steps) <= 12 + 1e-9


def test_max_inf_picks_largest_affordable(small_graph):
    tr = run_heuristic(small_graph, MitigationConfig(budget=20), "max_inf", 1, seed=1)[0]
    assert tr.actions[0] == int(np.argmax(small_graph.e))


def test_heuristic_episode_seeds_match_learners(small_graph):
    cfg = MitigationConfig()
    tr = run_heuristic(small_graph, cfg, "max_def", 1, seed=9)[0]
    seed = int(make_streams(9)["episodes"].integers(2**31))
    assert np.array_equal(MitigationEnv(small_graph, cfg).reset(seed), tr.steps[0].s)
