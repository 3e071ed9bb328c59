"""Good/bad experience memories for self-imitation.

Both memories rank episodes by reward and break ties by arrival order
(the earlier episode is kept), so contents depend only on the episode stream.
"""

from __future__ import annotations

import bisect
import json
import math
from pathlib import Path

import numpy as np

from .env import EpisodeTrace


class EmptyMemoryError(ValueError):
    pass


class _RankedMemory:
    def __init__(self):
        self.seen = 0
        self._keys: list[tuple] = []
        self._episodes: list[EpisodeTrace] = []

    def _sort_key(self, reward: float, arrival: int) -> tuple:
        raise NotImplementedError

    def _add(self, episode: EpisodeTrace, limit: int) -> None:
        key = self._sort_key(episode.reward, self.seen)
        pos = bisect.bisect(self._keys, key)
        if pos < limit:
            self._keys.insert(pos, key)
            self._episodes.insert(pos, episode)
            del self._keys[limit:], self._episodes[limit:]

    @property
    def entries(self) -> list[EpisodeTrace]:
        return list(self._episodes)

    @property
    def rewards(self) -> list[float]:
        return [ep.reward for ep in self.entries]

    def __len__(self):
        return len(self.entries)

    def sample_transitions(self, batch_size: int, rng: np.random.Generator | int):
        """``batch_size`` steps drawn uniformly, with replacement, from all stored steps."""
        steps = [st for ep in self.entries for st in ep.steps]
        if not steps:
            raise EmptyMemoryError("memory holds no transitions")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        idx = rng.integers(len(steps), size=batch_size)
        return [steps[i] for i in idx]

    def dump_jsonl(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for ep in self.entries:
                fh.write(json.dumps({"reward": ep.reward, "actions": ep.actions}) + "\n")


class GoodMemory(_RankedMemory):
    """The ``capacity`` highest-reward episodes seen so far."""

    def __init__(self, capacity: int = 20):
        super().__init__()
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity

    def _sort_key(self, reward, arrival):
        return (-reward, arrival)

    def insert(self, episode: EpisodeTrace) -> "GoodMemory":
        if not math.isfinite(episode.reward):
            raise ValueError("episode reward must be finite")
        self._add(episode, self.capacity)
        self.seen += 1
        return self


class BadMemory(_RankedMemory):
    """The lowest-reward ``floor(fraction * seen)`` episodes, at most ``cap``.

    Candidates are kept up to ``cap`` so that growth of the allowed size can
    admit an episode that was not a member when it arrived.
    """

    def __init__(self, fraction: float = 0.10, cap: int = 100):
        super().__init__()
        if not 0 <= fraction <= 1:
            raise ValueError("fraction must lie in [0, 1]")
        self.fraction = fraction
        self.cap = cap

    def _sort_key(self, reward, arrival):
        return (reward, arrival)

    @property
    def size(self) -> int:
        return min(self.cap, math.floor(self.fraction * self.seen + 1e-9))

    @property
    def entries(self) -> list[EpisodeTrace]:
        return self._episodes[: self.size]

    def insert(self, episode: EpisodeTrace) -> "BadMemory":
        if not math.isfinite(episode.reward):
            raise ValueError("episode reward must be finite")
        self._add(episode, self.cap)
        self.seen += 1
        return self
