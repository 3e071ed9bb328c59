"""SEIR news propagation with decaying posting intensities.

Time advances in fixed ticks of length ``dt``.  At the start of a tick every
Infected (Recovered) user posts one fake (true) item with probability
``min(1, intensity * dt)``; the item reaches all followers, and each receiver
resolves its e-state transition once per receipt.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable

import numpy as np

from .netgen import SocialGraph

XI_LOW, XI_HIGH = 0.5, 1.5
_CLOCK_DIGITS = 10


class EState(IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    INFECTED = 2
    RECOVERED = 3


@dataclass
class UserDynamics:
    e_state: EState
    n_fake: int = 0
    n_true: int = 0
    xi: float = 0.0
    t_c: float = 0.0


@dataclass(frozen=True)
class PropagationParams:
    delta: float = 1.0
    omega: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if not 0 < self.dt <= 1:
            raise ValueError("dt must lie in (0, 1]")


def uniform_intensity(low: float = XI_LOW, high: float = XI_HIGH) -> Callable[[np.random.Generator], float]:
    def draw(rng: np.random.Generator) -> float:
        return float(rng.uniform(low, high))
    return draw


def empirical_intensity(path) -> Callable[[np.random.Generator], float]:
    """Resample initial intensities from a file with one value per line ('#' comments)."""
    values = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            values.append(float(line))
    if not values:
        raise ValueError(f"{path}: no intensity values")
    if min(values) < 0:
        raise ValueError(f"{path}: intensities must be nonnegative")
    arr = np.array(values)

    def draw(rng: np.random.Generator) -> float:
        return float(arr[rng.integers(len(arr))])
    return draw


@dataclass
class PostEvent:
    time: float
    poster: int
    kind: str  # "F" or "M"
    receivers: tuple[int, ...]
    new_states: tuple[int, ...]


@dataclass
class SimState:
    """Mutable per-user dynamics plus clock and named random streams."""

    graph: SocialGraph
    estate: list[int]
    n_fake: list[int]
    n_true: list[int]
    xi: list[float]
    t_c: list[float]
    posts_fake: list[int]
    posts_true: list[int]
    rngs: dict[str, np.random.Generator]
    clock: float = 0.0
    xi_sampler: Callable[[np.random.Generator], float] = field(default_factory=uniform_intensity)

    @property
    def n(self) -> int:
        return self.graph.n

    def user(self, i: int) -> UserDynamics:
        return UserDynamics(EState(self.estate[i]), self.n_fake[i], self.n_true[i], self.xi[i], self.t_c[i])

    def counts(self) -> dict[EState, int]:
        return {s: self.estate.count(int(s)) for s in EState}

    def snapshot(self) -> tuple:
        """Hashable summary of everything except the random streams."""
        return (self.clock, tuple(self.estate), tuple(self.n_fake), tuple(self.n_true),
                tuple(self.xi), tuple(self.t_c), tuple(self.posts_fake), tuple(self.posts_true))


RNG_STREAMS = ("post", "transition", "xi", "seeding", "reward")


def new_state(graph: SocialGraph, seed: int, xi_sampler=None) -> SimState:
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    rngs = {name: np.random.default_rng(ss) for name, ss in zip(RNG_STREAMS, children)}
    n = graph.n
    return SimState(
        graph=graph,
        estate=[int(EState.SUSCEPTIBLE)] * n,
        n_fake=[0] * n,
        n_true=[0] * n,
        xi=[0.0] * n,
        t_c=[0.0] * n,
        posts_fake=[0] * n,
        posts_true=[0] * n,
        rngs=rngs,
        xi_sampler=xi_sampler or uniform_intensity(),
    )


def logistic(x: float, midpoint: float, delta: float = 1.0) -> float:
    z = -delta * (x - midpoint)
    if z > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


def transition_probs(user: UserDynamics, midpoint: float, delta: float = 1.0) -> tuple[float, float]:
    """(probability of becoming Infected, probability of becoming Recovered)."""
    diff = user.n_fake - user.n_true
    if diff > 0:
        return logistic(diff, midpoint, delta), 0.0
    if diff < 0:
        return 0.0, logistic(-diff, midpoint, delta)
    return 0.0, 0.0


def intensity_at(user: UserDynamics, t: float, omega: float = 1.0) -> float:
    if user.e_state not in (EState.INFECTED, EState.RECOVERED):
        raise ValueError(f"intensity undefined for a {user.e_state.name} user")
    if t < user.t_c:
        raise ValueError(f"t={t} precedes transition time {user.t_c}")
    return user.xi * math.exp(-omega * (t - user.t_c))


def _set_spreader(state: SimState, i: int, kind: EState, t: float) -> None:
    state.estate[i] = int(kind)
    state.xi[i] = state.xi_sampler(state.rngs["xi"])
    state.t_c[i] = t


def seed_fake_spreaders(state: SimState, k: int) -> SimState:
    if not 0 <= k <= state.n:
        raise ValueError(f"cannot seed {k} spreaders among {state.n} users")
    chosen = state.rngs["seeding"].choice(state.n, size=k, replace=False)
    for i in sorted(int(c) for c in chosen):
        _set_spreader(state, i, EState.INFECTED, state.clock)
    return state


def deploy_debunker(state: SimState, user: int) -> SimState:
    if not 0 <= user < state.n:
        raise IndexError(f"user {user} outside 0..{state.n - 1}")
    _set_spreader(state, user, EState.RECOVERED, state.clock)
    return state


def tick(state: SimState, params: PropagationParams, dt: float | None = None) -> list[PostEvent]:
    """Advance one step; returns the posts made during it."""
    dt = params.dt if dt is None else dt
    t = state.clock
    t_next = round(t + dt, _CLOCK_DIGITS)
    estate = state.estate
    infected, recovered = int(EState.INFECTED), int(EState.RECOVERED)

    spreaders = [i for i, s in enumerate(estate) if s >= infected]
    if not spreaders:
        state.clock = t_next
        return []

    omega = params.omega
    draws = state.rngs["post"].random(len(spreaders)).tolist()
    posters = []
    for i, u in zip(spreaders, draws):
        rate = state.xi[i] * math.exp(-omega * (t - state.t_c[i]))
        if u < min(1.0, rate * dt):
            posters.append((i, estate[i]))

    followers_of = state.graph.followers
    x = state.graph.x_list
    delta = params.delta
    n_fake, n_true = state.n_fake, state.n_true
    rng_tr = state.rngs["transition"]
    events = []
    for i, kind in posters:
        fake = kind == infected
        if fake:
            state.posts_fake[i] += 1
        else:
            state.posts_true[i] += 1
        followers = followers_of[i]
        rolls = rng_tr.random(len(followers)).tolist()
        new_states = []
        for v, roll in zip(followers, rolls):
            if fake:
                n_fake[v] += 1
            else:
                n_true[v] += 1
            if estate[v] == 0:
                estate[v] = 1
            diff = n_fake[v] - n_true[v]
            if diff > 0:
                target, p = infected, logistic(diff, x[v], delta)
            elif diff < 0:
                target, p = recovered, logistic(-diff, x[v], delta)
            else:
                target, p = -1, 0.0
            if target >= 0 and estate[v] != target and roll < p:
                _set_spreader(state, v, EState(target), t_next)
            new_states.append(estate[v])
        events.append(PostEvent(t, i, "F" if fake else "M", tuple(followers), tuple(new_states)))

    state.clock = t_next
    return events


def run_until(state: SimState, t_end: float, params: PropagationParams,
              log: list[PostEvent] | None = None) -> SimState:
    """Tick until ``t_end``; a trailing partial step covers any remainder."""
    if t_end < state.clock - 1e-9:
        raise ValueError(f"t_end={t_end} is before clock={state.clock}")
    eps = 1e-9
    while state.clock + params.dt <= t_end + eps:
        events = tick(state, params)
        if log is not None:
            log.extend(events)
    remaining = t_end - state.clock
    if remaining > eps:
        events = tick(state, params, dt=remaining)
        if log is not None:
            log.extend(events)
    state.clock = max(state.clock, round(t_end, _CLOCK_DIGITS))
    return state


def write_event_log(events: list[PostEvent], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tick_time", "poster", "kind", "receiver", "new_estate"])
        for ev in events:
            for v, s in zip(ev.receivers, ev.new_states):
                w.writerow([f"{ev.time:.6f}", ev.poster, ev.kind, v, EState(s).name])
