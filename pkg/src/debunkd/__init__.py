"""Debunker selection for fake-news mitigation on social networks."""

from .env import EpisodeTrace, MitigationConfig, MitigationEnv
from .netgen import SocialGraph, generate_scale_free, load_edge_list
from .propagation import EState, PropagationParams
from .trainer import TrainConfig, train

__all__ = [
    "EState",
    "EpisodeTrace",
    "MitigationConfig",
    "MitigationEnv",
    "PropagationParams",
    "SocialGraph",
    "TrainConfig",
    "generate_scale_free",
    "load_edge_list",
    "train",
]
