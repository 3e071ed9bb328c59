"""Multi-stage debunker selection on top of the propagation engine.

Each stage the agent deploys one affordable user as a debunker, then the
network evolves for ``stage_length`` time units.  The only reward is the
episodic one, computed ``t_tail`` time units after the last stage.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .netgen import SocialGraph
from .propagation import (
    EState,
    PropagationParams,
    SimState,
    deploy_debunker,
    new_state,
    run_until,
    seed_fake_spreaders,
    transition_probs,
)


@dataclass(frozen=True)
class MitigationConfig:
    budget: float = 20.0
    stage_length: float = 1.0
    t_start: float = 5.0
    t_tail: float = 5.0
    psi: float = 0.9
    initial_spreaders: int = 20
    reuse_debunkers: bool = False
    sampled_reward: bool = False

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.stage_length <= 0:
            raise ValueError("stage_length must be positive")
        if not 0 <= self.psi <= 1:
            raise ValueError("psi must lie in [0, 1]")
        if self.initial_spreaders < 0:
            raise ValueError("initial_spreaders must be nonnegative")


@dataclass
class Step:
    s: np.ndarray
    s_prime: np.ndarray
    action: int
    mask: np.ndarray
    cost: float
    remaining_budget: float


@dataclass
class EpisodeTrace:
    steps: list[Step] = field(default_factory=list)
    reward: float = float("nan")

    def __len__(self):
        return len(self.steps)

    @property
    def actions(self) -> list[int]:
        return [st.action for st in self.steps]


def observe(state: SimState) -> np.ndarray:
    """Masked observation ``[r_I; d_I; r_R; d_R; e]`` (length 5n)."""
    estate = np.asarray(state.estate)
    return np.concatenate([
        (estate == EState.INFECTED).astype(float),
        np.asarray(state.posts_fake, dtype=float),
        (estate == EState.RECOVERED).astype(float),
        np.asarray(state.posts_true, dtype=float),
        state.graph.e.astype(float),
    ])


def infection_probabilities(state: SimState, delta: float = 1.0) -> np.ndarray:
    """Per-user chance of counting as Infected: 1, 0 for Recovered, else the Infected transition probability."""
    p = np.empty(state.n)
    x = state.graph.x
    for i in range(state.n):
        s = state.estate[i]
        if s == EState.INFECTED:
            p[i] = 1.0
        elif s == EState.RECOVERED:
            p[i] = 0.0
        else:
            p[i] = transition_probs(state.user(i), x[i], delta)[0]
    return p


def full_state(state: SimState, params: PropagationParams) -> np.ndarray:
    """Unmasked state ``[P_I; r_I; d_I; P_R; r_R; d_R; iota; e]`` (length 8n), for debugging."""
    n = state.n
    p_inf, p_rec, iota = np.zeros(n), np.zeros(n), np.zeros(n)
    for i in range(n):
        user = state.user(i)
        p_inf[i], p_rec[i] = transition_probs(user, state.graph.x[i], params.delta)
        if user.e_state in (EState.INFECTED, EState.RECOVERED):
            iota[i] = user.xi * math.exp(-params.omega * (state.clock - user.t_c))
    s = observe(state)
    return np.concatenate([p_inf, s[:2 * n], p_rec, s[2 * n:4 * n], iota, s[4 * n:]])


def reward_from_count(c: float, n: int) -> float:
    return -math.log((c + 1.0) / (n + 1.0))


def episodic_reward(state: SimState, config: MitigationConfig, params: PropagationParams | None = None) -> float:
    """Smoothed negative log fraction of (expected) infected users."""
    delta = params.delta if params else 1.0
    p = infection_probabilities(state, delta)
    if config.sampled_reward:
        c = float((state.rngs["reward"].random(state.n) < p).sum())
    else:
        c = float(p.sum())
    return reward_from_count(c, state.n)


def one_hot(a: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[a] = 1.0
    return v


def augment(history: Sequence[tuple[np.ndarray, np.ndarray]], psi: float, dim: int | None = None) -> np.ndarray:
    """Discounted average of past ``[s; a]`` pairs, by direct summation.

    ``history`` holds ``(s_m, a_m_onehot)`` for m = 1..i; returns s'_{i+1}.
    An empty history gives the zero vector of length ``dim``.
    Use :class:`AugmentedState` for the incremental form.
    """
    if not 0 <= psi <= 1:
        raise ValueError("psi must lie in [0, 1]")
    if not history:
        if dim is None:
            raise ValueError("dim is required for an empty history")
        return np.zeros(dim)
    i = len(history)
    total = np.zeros(len(history[0][0]) + len(history[0][1]))
    for m, (s, a) in enumerate(history, start=1):
        total += psi ** (i - m) * np.concatenate([s, a])
    return total / i


class AugmentedState:
    """Running form of :func:`augment`: S_i = psi * S_{i-1} + [s_i; a_i], s' = S_i / i."""

    def __init__(self, dim: int, psi: float):
        if not 0 <= psi <= 1:
            raise ValueError("psi must lie in [0, 1]")
        self.psi = psi
        self.count = 0
        self._sum = np.zeros(dim)

    def push(self, s: np.ndarray, a_onehot: np.ndarray) -> None:
        self._sum *= self.psi
        self._sum += np.concatenate([s, a_onehot])
        self.count += 1

    @property
    def value(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self._sum)
        return self._sum / self.count


def action_mask(state: SimState, remaining_budget: float, used, config: MitigationConfig) -> np.ndarray:
    mask = state.graph.c <= remaining_budget + 1e-12
    if not config.reuse_debunkers and used:
        mask[list(used)] = False
    return mask


class MaskedActionError(ValueError):
    pass


class MitigationEnv:
    """One mitigation campaign at a time over a fixed graph."""

    def __init__(self, graph: SocialGraph, config: MitigationConfig | None = None,
                 params: PropagationParams | None = None, xi_sampler=None):
        self.graph = graph
        self.config = config or MitigationConfig()
        self.params = params or PropagationParams()
        self.xi_sampler = xi_sampler
        self.state: SimState | None = None
        self.remaining = 0.0
        self.used: set[int] = set()
        self.done = True

    @property
    def n(self) -> int:
        return self.graph.n

    def reset(self, seed: int) -> np.ndarray:
        state = new_state(self.graph, seed, self.xi_sampler)
        seed_fake_spreaders(state, self.config.initial_spreaders)
        run_until(state, self.config.t_start, self.params)
        # activity counters measure posts since mitigation began
        state.posts_fake = [0] * state.n
        state.posts_true = [0] * state.n
        self.state = state
        self.remaining = float(self.config.budget)
        self.used = set()
        self.done = not self.mask().any()
        return observe(state)

    def mask(self) -> np.ndarray:
        return action_mask(self.state, self.remaining, self.used, self.config)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        """Deploy ``action`` and let the network run one stage."""
        if self.done:
            raise MaskedActionError("episode is finished")
        action = int(action)
        if not (0 <= action < self.n) or not self.mask()[action]:
            raise MaskedActionError(f"action {action} is masked")
        deploy_debunker(self.state, action)
        self.remaining -= float(self.graph.c[action])
        self.used.add(action)
        run_until(self.state, self.state.clock + self.config.stage_length, self.params)
        self.done = not self.mask().any()
        return observe(self.state), self.remaining, self.done

    def finish(self) -> float:
        """Run the post-campaign tail and return the episodic reward."""
        run_until(self.state, self.state.clock + self.config.t_tail, self.params)
        return episodic_reward(self.state, self.config, self.params)


Chooser = Callable[[np.ndarray, np.ndarray, np.ndarray], int]


def run_episode(env: MitigationEnv, choose: Chooser, seed: int, use_augmented_state: bool = True) -> EpisodeTrace:
    """Play one campaign with ``choose(s, s_prime, mask) -> user``."""
    s = env.reset(seed)
    n = env.n
    aug = AugmentedState(6 * n, env.config.psi)
    trace = EpisodeTrace()
    while not env.done:
        mask = env.mask()
        s_prime = aug.value if use_augmented_state else np.zeros(6 * n)
        a = int(choose(s, s_prime, mask))
        s_next, remaining, _ = env.step(a)
        trace.steps.append(Step(s, s_prime, a, mask, float(env.graph.c[a]), remaining))
        aug.push(s, one_hot(a, n))
        s = s_next
    trace.reward = env.finish()
    return trace


def write_traces(traces: Sequence[EpisodeTrace], path, rewards_path=None) -> None:
    """Stage-level CSV (episode, stage, action, cost, remaining_budget) and optional rewards CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "stage", "action", "cost", "remaining_budget"])
        for ep, tr in enumerate(traces):
            for k, st in enumerate(tr.steps):
                w.writerow([ep, k, st.action, f"{st.cost:.6f}", f"{st.remaining_budget:.6f}"])
    if rewards_path is not None:
        write_rewards([tr.reward for tr in traces], rewards_path)


def write_rewards(rewards: Sequence[float], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "reward"])
        for ep, r in enumerate(rewards):
            w.writerow([ep, f"{r:.6f}"])
