"""Adversarial self-imitation training with negative samples and augmented state.

One iteration: play an episode with the current policy, file it into the
good/bad memories, fit the negative-sample model on bad transitions, take an
ascent step on the discriminator (agent vs. good transitions), then a
policy-gradient step using ``-log D`` as the per-stage reward together with
the entropy bonus and the negative-sample penalty.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .approximator import (
    LOG_FLOOR,
    Adam,
    Mlp,
    cross_entropy,
    discriminator_objective,
    entropy,
    masked_softmax,
    negative_regularizer_loss,
    policy_surrogate,
    save_mlp,
    sigmoid,
    softmax,
)
from .env import EpisodeTrace, MitigationConfig, MitigationEnv, Step, run_episode
from .memory import BadMemory, GoodMemory
from .netgen import SocialGraph
from .propagation import PropagationParams

log = logging.getLogger(__name__)

STREAMS = ("init_policy", "init_disc", "init_neg", "episodes", "actions", "expert", "bad")

ABLATIONS = {
    "nagasil": (True, True),
    "ngasil": (False, True),
    "agasil": (True, False),
    "gasil": (False, False),
}


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    expert_batch: int = 64
    bad_batch: int = 64
    disc_steps: int = 1
    policy_steps: int = 1
    neg_steps: int = 1
    gamma_r: float = 0.99
    lam: float = 0.01
    lam1: float = 0.1
    good_capacity: int = 20
    bad_fraction: float = 0.10
    bad_cap: int = 100
    hidden: tuple[int, ...] = (64, 64)
    policy_lr: float = 1e-3
    disc_lr: float = 1e-3
    neg_lr: float = 1e-3
    baseline_rate: float = 0.1
    use_augmented_state: bool = True
    use_negative_samples: bool = True
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.lam < 0 or self.lam1 < 0:
            raise ValueError("lam and lam1 must be nonnegative")
        if not 0 <= self.gamma_r <= 1:
            raise ValueError("gamma_r must lie in [0, 1]")

    @classmethod
    def for_variant(cls, variant: str, **kw) -> "TrainConfig":
        aug, neg = ABLATIONS[variant]
        return cls(use_augmented_state=aug, use_negative_samples=neg, **kw)


def features(x: np.ndarray) -> np.ndarray:
    """Network input transform: log1p compresses post and follower counts."""
    return np.log1p(x)


def policy_inputs(steps: list[Step]) -> np.ndarray:
    return features(np.array([np.concatenate([st.s, st.s_prime]) for st in steps]))


def disc_inputs(steps: list[Step], n: int) -> np.ndarray:
    x = policy_inputs(steps)
    onehot = np.zeros((len(steps), n))
    onehot[np.arange(len(steps)), [st.action for st in steps]] = 1.0
    return np.hstack([x, onehot])


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def build_networks(n: int, cfg: TrainConfig, streams) -> tuple[Mlp, Mlp, Mlp]:
    hidden = list(cfg.hidden)
    theta = Mlp([11 * n, *hidden, n], "masked_softmax", streams["init_policy"])
    phi = Mlp([12 * n, *hidden, 1], "sigmoid", streams["init_disc"])
    neg = Mlp([11 * n, *hidden, n], "softmax", streams["init_neg"])
    return theta, phi, neg


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(probs) - 1))


def make_chooser(theta: Mlp, rng: np.random.Generator, greedy: bool = False):
    def choose(s, s_prime, mask):
        logits, _ = theta.forward(features(np.concatenate([s, s_prime]))[None, :])
        p = masked_softmax(logits, mask[None, :])[0]
        return int(np.argmax(p)) if greedy else sample_action(p, rng)
    return choose


def rollout(env: MitigationEnv, theta: Mlp, seed: int, rng: np.random.Generator,
            use_augmented_state: bool = True, greedy: bool = False) -> EpisodeTrace:
    """One campaign with actions drawn from the policy; ``s'`` is zero when ablated."""
    return run_episode(env, make_chooser(theta, rng, greedy), seed, use_augmented_state)


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    g = np.zeros(len(rewards))
    acc = 0.0
    for t in reversed(range(len(rewards))):
        acc = rewards[t] + gamma * acc
        g[t] = acc
    return g


class StageBaseline:
    """Running mean of the return observed at each stage index.

    The first visit to an index initialises it to the observed return, so a
    stage whose return never changes always yields a zero advantage.
    """

    def __init__(self, rate: float = 0.1):
        self.rate = rate
        self.values: list[float] = []

    def advantages(self, returns: np.ndarray) -> np.ndarray:
        adv = np.zeros(len(returns))
        for t, g in enumerate(returns):
            if t >= len(self.values):
                self.values.append(float(g))
            adv[t] = g - self.values[t]
            self.values[t] += self.rate * (g - self.values[t])
        return adv


def negative_regularizer(pi_probs: np.ndarray, m_probs: np.ndarray) -> float:
    """Sum of pi_k^2 over coordinates where pi_k - M_k is strictly negative.

    Summed with ``math.fsum`` so the result is correctly rounded and does not
    depend on summation order.
    """
    pi_probs = np.asarray(pi_probs, dtype=float)
    return math.fsum(np.where(pi_probs - np.asarray(m_probs) < 0, pi_probs * pi_probs, 0.0).tolist())


def check_finite(*nets: Mlp) -> None:
    for net in nets:
        if not net.all_finite():
            raise FloatingPointError("non-finite parameter after update")


@dataclass
class TrainerState:
    theta: Mlp
    phi: Mlp
    neg_model: Mlp
    config: TrainConfig
    good: GoodMemory
    bad: BadMemory
    streams: dict
    policy_opt: Adam = field(default_factory=Adam)
    disc_opt: Adam = field(default_factory=Adam)
    neg_opt: Adam = field(default_factory=Adam)
    baseline: StageBaseline = field(default_factory=StageBaseline)
    iteration: int = 0
    neg_trained: bool = False

    @property
    def lam(self):
        return self.config.lam

    @property
    def lam1(self):
        return self.config.lam1 if self.config.use_negative_samples else 0.0

    def param_digest(self) -> str:
        h = hashlib.sha256()
        for net in (self.theta, self.phi):
            for name in sorted(net.params):
                h.update(name.encode())
                h.update(net.params[name].tobytes())
        return h.hexdigest()


def init_trainer(n: int, cfg: TrainConfig, seed: int) -> TrainerState:
    streams = make_streams(seed)
    theta, phi, neg = build_networks(n, cfg, streams)
    return TrainerState(
        theta=theta, phi=phi, neg_model=neg, config=cfg,
        good=GoodMemory(cfg.good_capacity), bad=BadMemory(cfg.bad_fraction, cfg.bad_cap),
        streams=streams,
        policy_opt=Adam(cfg.policy_lr), disc_opt=Adam(cfg.disc_lr), neg_opt=Adam(cfg.neg_lr),
        baseline=StageBaseline(cfg.baseline_rate),
    )


def train_negative_model(neg_model: Mlp, opt: Adam, bad_batch: list[Step]) -> float:
    """One cross-entropy descent step of the bad-action model; returns the loss before the step."""
    if not bad_batch:
        raise ValueError("empty bad batch")
    x = policy_inputs(bad_batch)
    out, acts = neg_model.forward(x)
    loss, d = cross_entropy(out, np.array([st.action for st in bad_batch]))
    opt.step(neg_model.params, neg_model.backward(acts, d), "descend")
    return loss


def discriminator_update(phi: Mlp, opt: Adam, agent_batch: list[Step], expert_batch: list[Step], n: int) -> float:
    """One ascent step on mean log D(agent) + mean log(1 - D(good)); returns the objective before the step."""
    if not agent_batch or not expert_batch:
        raise ValueError("discriminator update needs both batches")
    x = np.vstack([disc_inputs(agent_batch, n), disc_inputs(expert_batch, n)])
    is_agent = np.arange(len(x)) < len(agent_batch)
    out, acts = phi.forward(x)
    value, d = discriminator_objective(out, is_agent)
    opt.step(phi.params, phi.backward(acts, d), "ascend")
    return value


def stage_rewards(phi: Mlp, trace: EpisodeTrace, n: int) -> np.ndarray:
    """Per-stage imitation reward ``-log D(s, s', a)``."""
    z, _ = phi.forward(disc_inputs(trace.steps, n))
    return -np.log(np.clip(sigmoid(z[:, 0]), LOG_FLOOR, 1.0))


def policy_update(theta: Mlp, opt: Adam, trace: EpisodeTrace, phi: Mlp, neg_model: Mlp | None,
                  lam: float, lam1: float, gamma_r: float, baseline: StageBaseline,
                  rewards: np.ndarray | None = None) -> dict[str, float]:
    """One ascent step on  surrogate + lam * entropy - lam1 * negative penalty.

    ``rewards`` overrides the discriminator-derived stage rewards (for tests).
    ``neg_model`` is only evaluated when ``lam1 > 0``.
    """
    if not trace.steps:
        raise ValueError("empty trace")
    n = theta.dims[-1]
    r = stage_rewards(phi, trace, n) if rewards is None else np.asarray(rewards, dtype=float)
    adv = baseline.advantages(discounted_returns(r, gamma_r))
    x = policy_inputs(trace.steps)
    mask = np.array([st.mask for st in trace.steps])
    actions = np.array(trace.actions)
    out, acts = theta.forward(x)
    sur, d = policy_surrogate(out, mask, actions, adv)
    h, d_h = entropy(out, mask)
    d = d + lam * d_h
    info = {"surrogate": sur, "entropy": h, "negative": 0.0}
    if lam1 > 0 and neg_model is not None:
        m_out, _ = neg_model.forward(x)
        neg, d_n = negative_regularizer_loss(out, mask, softmax(m_out))
        d = d - lam1 * d_n
        info["negative"] = neg
    opt.step(theta.params, theta.backward(acts, d), "ascend")
    return info


def iterate(ts: TrainerState, env: MitigationEnv) -> EpisodeTrace:
    """One pass of the training loop; returns the generated episode."""
    cfg = ts.config
    n = env.n
    st = ts.streams
    seed = int(st["episodes"].integers(2**31))
    trace = rollout(env, ts.theta, seed, st["actions"], cfg.use_augmented_state)

    ts.good.insert(trace)
    if cfg.use_negative_samples:
        ts.bad.insert(trace)

    if cfg.use_negative_samples and len(ts.bad):
        for _ in range(cfg.neg_steps):
            batch = ts.bad.sample_transitions(cfg.bad_batch, st["bad"])
            train_negative_model(ts.neg_model, ts.neg_opt, batch)
        ts.neg_trained = True

    if trace.steps:
        for _ in range(cfg.disc_steps):
            expert = ts.good.sample_transitions(cfg.expert_batch, st["expert"])
            discriminator_update(ts.phi, ts.disc_opt, trace.steps, expert, n)
        neg = ts.neg_model if ts.neg_trained else None
        for _ in range(cfg.policy_steps):
            policy_update(ts.theta, ts.policy_opt, trace, ts.phi, neg,
                          ts.lam, ts.lam1 if neg is not None else 0.0, cfg.gamma_r, ts.baseline)
    check_finite(ts.theta, ts.phi, ts.neg_model)
    ts.iteration += 1
    return trace


def train(graph: SocialGraph, env_config: MitigationConfig, cfg: TrainConfig, seed: int,
          params: PropagationParams | None = None, xi_sampler=None,
          on_iteration: Callable[[TrainerState, EpisodeTrace], None] | None = None,
          checkpoint_dir=None) -> tuple[TrainerState, list[float]]:
    env = MitigationEnv(graph, env_config, params, xi_sampler)
    ts = init_trainer(graph.n, cfg, seed)
    rewards = []
    for it in range(cfg.iterations):
        trace = iterate(ts, env)
        rewards.append(trace.reward)
        if on_iteration is not None:
            on_iteration(ts, trace)
        if checkpoint_dir and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(ts, checkpoint_dir, tag=f"{it + 1:06d}")
        if (it + 1) % 100 == 0:
            log.info("iteration %d: mean reward of last 100 = %.4f", it + 1, np.mean(rewards[-100:]))
    return ts, rewards


def save_checkpoint(ts: TrainerState, directory, tag: str = "final") -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_mlp(ts.theta, d / f"policy_{tag}.params")
    save_mlp(ts.phi, d / f"discriminator_{tag}.params")
    if ts.config.use_negative_samples:
        save_mlp(ts.neg_model, d / f"negative_{tag}.params")


def evaluate(graph: SocialGraph, env_config: MitigationConfig, theta: Mlp, episodes: int, seed: int,
             use_augmented_state: bool = True, params: PropagationParams | None = None,
             xi_sampler=None, greedy: bool = False) -> list[EpisodeTrace]:
    """Roll out a frozen policy."""
    env = MitigationEnv(graph, env_config, params, xi_sampler)
    streams = make_streams(seed)
    return [rollout(env, theta, int(streams["episodes"].integers(2**31)), streams["actions"],
                    use_augmented_state, greedy) for _ in range(episodes)]
