"""Planar legged-robot environments: morphologies, terrain tracks, dynamics."""

from .kernels import BACKEND, get_backend, step_batch
from .morphology import REGISTRY, Morphology, generate_morphology, get_morphology
from .terrain import (
    DIFFICULTY_RANGES,
    KINDS,
    TRACK_LENGTH,
    Terrain,
    difficulty_param,
    generate_terrain,
)
from .world import (
    EnvBatch,
    EnvConfig,
    EnvState,
    PlanarEnv,
    RewardWeights,
    initial_state,
    observe,
    reward,
    sample_command,
    step_once,
)

__all__ = [
    "BACKEND", "EnvBatch", "EnvConfig", "EnvState", "KINDS", "Morphology",
    "PlanarEnv", "REGISTRY", "RewardWeights", "Terrain", "TRACK_LENGTH",
    "DIFFICULTY_RANGES", "difficulty_param", "generate_morphology",
    "generate_terrain", "get_backend", "get_morphology", "initial_state",
    "observe", "reward", "sample_command", "step_batch", "step_once",
]
