"""Comparison policies: heuristics and a plain adversarial self-imitation loop.

Heuristics see the same masked observation and budget mask as the learned
policies.  ``train_gasil_reference`` is a deliberately separate, minimal
implementation of the no-negative-samples / no-augmented-state learner; the
full trainer with both features switched off must reproduce it exactly.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .approximator import Adam, discriminator_objective, entropy, policy_surrogate
from .env import EpisodeTrace, MitigationConfig, MitigationEnv, run_episode
from .memory import GoodMemory
from .netgen import SocialGraph
from .propagation import PropagationParams
from .trainer import (
    TrainConfig,
    build_networks,
    disc_inputs,
    discounted_returns,
    make_streams,
    policy_inputs,
    StageBaseline,
    rollout,
    stage_rewards,
)

POLICIES = ("rnd", "max_inf", "max_def", "gasil", "ngasil", "agasil", "nagasil")


class Heuristic(str, Enum):
    RND = "rnd"
    MAX_INF = "max_inf"
    MAX_DEF = "max_def"


def _masked_argmax(values: np.ndarray, mask: np.ndarray) -> int:
    # np.argmax returns the first maximum: ties go to the lowest index
    return int(np.argmax(np.where(mask, values, -np.inf)))


def select(policy: Heuristic | str, observation: np.ndarray, mask: np.ndarray,
           rng: np.random.Generator | int | None = None) -> int:
    policy = Heuristic(policy)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("no unmasked action")
    n = len(mask)
    if policy is Heuristic.MAX_INF:
        return _masked_argmax(observation[4 * n:5 * n], mask)
    if policy is Heuristic.MAX_DEF:
        return _masked_argmax(observation[n:2 * n], mask)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return int(rng.choice(np.flatnonzero(mask)))


def run_heuristic(graph: SocialGraph, env_config: MitigationConfig, policy: Heuristic | str,
                  episodes: int, seed: int, params: PropagationParams | None = None,
                  xi_sampler=None) -> list[EpisodeTrace]:
    """Play ``episodes`` campaigns; episode seeds match those a learner with the same seed sees."""
    env = MitigationEnv(graph, env_config, params, xi_sampler)
    streams = make_streams(seed)
    rng = streams["actions"]

    def choose(s, s_prime, mask):
        return select(policy, s, mask, rng)

    return [run_episode(env, choose, int(streams["episodes"].integers(2**31)), use_augmented_state=False)
            for _ in range(episodes)]


def train_gasil_reference(graph: SocialGraph, env_config: MitigationConfig, cfg: TrainConfig, seed: int,
                          params: PropagationParams | None = None, on_iteration=None):
    """Plain GASIL: good memory, discriminator, policy gradient with entropy bonus; ``s'`` fixed at zero."""
    n = graph.n
    env = MitigationEnv(graph, env_config, params)
    streams = make_streams(seed)
    theta, phi, _ = build_networks(n, cfg, streams)
    good = GoodMemory(cfg.good_capacity)
    policy_opt, disc_opt = Adam(cfg.policy_lr), Adam(cfg.disc_lr)
    baseline = StageBaseline(cfg.baseline_rate)
    rewards = []
    for _ in range(cfg.iterations):
        trace = rollout(env, theta, int(streams["episodes"].integers(2**31)), streams["actions"],
                        use_augmented_state=False)
        good.insert(trace)
        if trace.steps:
            for _ in range(cfg.disc_steps):
                expert = good.sample_transitions(cfg.expert_batch, streams["expert"])
                x = np.vstack([disc_inputs(trace.steps, n), disc_inputs(expert, n)])
                out, acts = phi.forward(x)
                _, d = discriminator_objective(out, np.arange(len(x)) < len(trace.steps))
                disc_opt.step(phi.params, phi.backward(acts, d), "ascend")
            for _ in range(cfg.policy_steps):
                adv = baseline.advantages(discounted_returns(stage_rewards(phi, trace, n), cfg.gamma_r))
                out, acts = theta.forward(policy_inputs(trace.steps))
                mask = np.array([st.mask for st in trace.steps])
                _, d = policy_surrogate(out, mask, np.array(trace.actions), adv)
                _, d_h = entropy(out, mask)
                policy_opt.step(theta.params, theta.backward(acts, d + cfg.lam * d_h), "ascend")
        rewards.append(trace.reward)
        if on_iteration is not None:
            on_iteration(theta, phi, trace)
    return theta, phi, rewards

