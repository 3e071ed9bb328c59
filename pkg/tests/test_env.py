import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from debunkd.env import (
    AugmentedState,
    EpisodeTrace,
    MaskedActionError,
    MitigationConfig,
    MitigationEnv,
    action_mask,
    augment,
    episodic_reward,
    full_state,
    observe,
    one_hot,
    reward_from_count,
    run_episode,
    write_traces,
)
from debunkd.netgen import from_edges, generate_scale_free
from debunkd.propagation import EState, PropagationParams, deploy_debunker, new_state


def cycle(n):
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def graph_with_followers(counts):
    """User i gets counts[i] followers drawn from a pool of extra users with none."""
    pool = max(counts)
    n = len(counts) + pool
    edges = [(i, len(counts) + j) for i, k in enumerate(counts) for j in range(k)]
    return from_edges(n, edges)


def random_choice(seed):
    rng = np.random.default_rng(seed)
    return lambda s, sp, mask: int(rng.choice(np.flatnonzero(mask)))


def test_reset_without_spreaders(small_graph):
    env = MitigationEnv(small_graph, MitigationConfig(initial_spreaders=0))
    s = env.reset(1)
    n = small_graph.n
    assert not s[:n].any() and not s[n:2 * n].any()


def test_reset_deterministic(small_graph):
    env = MitigationEnv(small_graph)
    assert np.array_equal(env.reset(4), env.reset(4))


def test_reset_receivers_not_susceptible():
    g = generate_scale_free(1250, 0.05, 0.8, 0.15, seed=1)
    env = MitigationEnv(g)
    env.reset(1)
    st_ = env.state
    assert all(st_.estate[i] != EState.SUSCEPTIBLE for i in range(g.n) if st_.n_fake[i] > 0)


def test_observe_all_susceptible(small_graph):
    state = new_state(small_graph, 1)
    n = small_graph.n
    s = observe(state)
    assert len(s) == 5 * n
    assert not s[:4 * n].any() and np.array_equal(s[4 * n:], small_graph.e)


def test_observe_recovered_poster(small_graph):
    state = new_state(small_graph, 1)
    deploy_debunker(state, 7)
    state.posts_true[7] = 2
    n = small_graph.n
    s = observe(state)
    assert s[2 * n + 7] == 1 and s[3 * n + 7] == 2
    assert np.array_equal(s, observe(state))


def test_full_state_layout(small_graph):
    env = MitigationEnv(small_graph)
    env.reset(2)
    n = small_graph.n
    f = full_state(env.state, env.params)
    s = observe(env.state)
    assert len(f) == 8 * n
    assert np.array_equal(f[n:3 * n], s[:2 * n]) and np.array_equal(f[7 * n:], s[4 * n:])
    assert ((0 <= f[:n]) & (f[:n] <= 1)).all() and (f[6 * n:7 * n] >= 0).all()


def test_augment_examples():
    s1, a1 = np.array([1.0, 2.0]), np.array([0.0, 1.0])
    assert np.array_equal(augment([(s1, a1)], 0.9), np.concatenate([s1, a1]))
    pairs = [(np.full(2, k), np.full(2, -k)) for k in (1.0, 2.0, 3.0)]
    assert np.allclose(augment(pairs, 0.0), np.concatenate(pairs[2]) / 3, atol=0)
    p1, p2 = pairs[0], pairs[1]
    assert np.allclose(augment([p1, p2], 0.5), (0.5 * np.concatenate(p1) + np.concatenate(p2)) / 2, atol=1e-15)
    assert np.array_equal(augment([], 0.5, dim=4), np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 15), st.sampled_from([0.0, 0.3, 0.9, 1.0]), st.integers(0, 2**32 - 1))
def test_incremental_matches_direct(length, psi, seed):
    rng = np.random.default_rng(seed)
    n = 4
    history = [(rng.normal(size=5 * n) * 10, one_hot(int(rng.integers(n)), n)) for _ in range(length)]
    inc = AugmentedState(6 * n, psi)
    assert not inc.value.any()
    for s, a in history:
        inc.push(s, a)
    assert np.max(np.abs(inc.value - augment(history, psi))) <= 1e-10


def test_mask_examples():
    g = graph_with_followers([0, 4, 9])
    assert g.c[:3].tolist() == [1.0, 5.0, 10.0]
    state = new_state(g, 1)
    cfg = MitigationConfig()
    assert action_mask(state, 4, set(), cfg)[:3].tolist() == [True, False, False]
    assert not action_mask(state, 0, set(), cfg).any()
    assert action_mask(state, 10, set(), cfg).all()
    assert not action_mask(state, 10, {0}, cfg)[0]
    assert action_mask(state, 10, {0}, MitigationConfig(reuse_debunkers=True))[0]


def test_two_stages_when_costs_are_ten():
    g = cycle(8)
    assert (g.c == 10).all()
    trace = run_episode(MitigationEnv(g, MitigationConfig(budget=20, initial_spreaders=2)), random_choice(0), 3)
    assert len(trace) == 2 and trace.steps[-1].remaining_budget == 0


def test_single_stage_when_cost_equals_budget():
    g = cycle(8)
    env = MitigationEnv(g, MitigationConfig(budget=10, initial_spreaders=2))
    env.reset(1)
    _, remaining, done = env.step(0)
    assert done and remaining == 0


def test_masked_action_rejected():
    g = graph_with_followers([0, 4, 9])
    env = MitigationEnv(g, MitigationConfig(budget=4, initial_spreaders=1))
    env.reset(1)
    with pytest.raises(MaskedActionError):
        env.step(2)
    env.step(0)
    with pytest.raises(MaskedActionError):
        env.step(0)


@pytest.mark.parametrize("seed", range(8))
def test_budget_conservation_and_mask_soundness(small_graph, seed):
    cfg = MitigationConfig(budget=20)
    trace = run_episode(MitigationEnv(small_graph, cfg), random_choice(seed), seed)
    spent = sum(st.cost for st in trace.steps)
    assert spent + trace.steps[-1].remaining_budget == pytest.approx(20)
    remaining = 20.0
    for st_ in trace.steps:
        assert st_.mask[st_.action] and st_.cost <= remaining + 1e-12
        remaining -= st_.cost
    assert len(set(trace.actions)) == len(trace.actions)
    assert 0 <= trace.reward <= math.log(small_graph.n + 1)


def test_campaign_length_depends_on_costs():
    g = generate_scale_free(1250, 0.05, 0.8, 0.15, seed=1)
    env = MitigationEnv(g)
    cheap = run_episode(env, lambda s, sp, m: int(np.flatnonzero(m)[np.argmin(g.c[m])]), 1)
    dear = run_episode(env, lambda s, sp, m: int(np.flatnonzero(m)[np.argmax(g.c[m])]), 1)
    assert len(cheap) == 20 and len(dear) < len(cheap)


def test_reward_examples():
    n = 10
    g = cycle(n)
    state = new_state(g, 1)
    for i in range(n):
        deploy_debunker(state, i)
    assert episodic_reward(state, MitigationConfig()) == pytest.approx(math.log(n + 1))
    state.estate = [int(EState.INFECTED)] * n
    assert episodic_reward(state, MitigationConfig()) == 0.0
    assert reward_from_count(50_000, 100_000) == pytest.approx(math.log(2), abs=1e-4)


def test_reward_uses_expected_count():
    g = cycle(4)
    state = new_state(g, 1)
    state.estate = [int(EState.INFECTED), int(EState.RECOVERED), int(EState.EXPOSED), int(EState.SUSCEPTIBLE)]
    state.n_fake[2] = 3
    p2 = 1 / (1 + math.exp(-(3 - g.x[2])))
    assert episodic_reward(state, MitigationConfig()) == pytest.approx(-math.log((1 + p2 + 1) / 5))


def test_sampled_reward_is_one_of_the_count_values():
    g = cycle(6)
    state = new_state(g, 1)
    state.estate = [int(EState.EXPOSED)] * 6
    state.n_fake = [2] * 6
    v = episodic_reward(state, MitigationConfig(sampled_reward=True))
    assert any(v == pytest.approx(reward_from_count(c, 6)) for c in range(7))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.floats(0, 1), st.floats(0, 1))
def test_reward_bounds(n, f1, f2):
    lo, hi = sorted((f1 * n, f2 * n))
    assert 0 <= reward_from_count(hi, n) <= reward_from_count(lo, n) <= math.log(n + 1) + 1e-12


@pytest.mark.parametrize("n", [1, 2, 100, 1250])
def test_reward_strictly_decreasing_in_count(n):
    values = [reward_from_count(c, n) for c in range(n + 1)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("kw", [dict(budget=0), dict(stage_length=0), dict(psi=1.5), dict(initial_spreaders=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MitigationConfig(**kw)


def test_first_augmented_state_is_zero(small_graph):
    trace = run_episode(MitigationEnv(small_graph), random_choice(1), 2)
    assert not trace.steps[0].s_prime.any()
    assert len(trace.steps[0].s_prime) == 6 * small_graph.n
    if len(trace) > 1:
        assert trace.steps[1].s_prime.any()


def test_observation_counters_nondecreasing(small_graph):
    trace = run_episode(MitigationEnv(small_graph), random_choice(3), 5)
    n = small_graph.n
    for a, b in zip(trace.steps, trace.steps[1:]):
        assert (b.s[n:2 * n] >= a.s[n:2 * n]).all() and (b.s[3 * n:4 * n] >= a.s[3 * n:4 * n]).all()
        assert not (b.s[:n] * b.s[2 * n:3 * n]).any()


def test_trace_dump(tmp_path, small_graph):
    env = MitigationEnv(small_graph)
    traces = [run_episode(env, random_choice(k), k) for k in range(2)]
    write_traces(traces, tmp_path / "t.csv", tmp_path / "r.csv")
    rows = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert list(rows[0]) == ["episode", "stage", "action", "cost", "remaining_budget"]
    assert len(rows) == sum(len(t) for t in traces)
    rewards = list(csv.DictReader((tmp_path / "r.csv").open()))
    assert [float(r["reward"]) for r in rewards] == pytest.approx([t.reward for t in traces], abs=1e-6)


def test_empty_trace_default():
    assert len(EpisodeTrace()) == 0
