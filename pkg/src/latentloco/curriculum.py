"""Track-difficulty progression: promote on episode success, demote on failure.

Success means traversing at least ``success_threshold`` of the track length
without falling.  Levels live in [0, 9]; the mean level over the env fleet is
the cross-platform progress metric.
"""

from dataclasses import dataclass, field

import numpy as np

MAX_LEVEL = 9


@dataclass
class CurriculumState:
    levels: np.ndarray                  # per-env level, int in [0, 9]
    kinds: list = field(default_factory=list)  # per-env terrain kind
    success_threshold: float = 0.8      # fraction of track length

    @classmethod
    def create(cls, n_envs, kinds, start_level=0, success_threshold=0.8):
        return cls(np.full(n_envs, int(start_level), dtype=int), list(kinds),
                   success_threshold)


def judge_episode(info, success_threshold=0.8):
    """success iff traversed >= threshold * track_length and no fall."""
    if info.get("fell", False):
        return "failure"
    if info["traversed"] >= success_threshold * info["track_length"]:
        return "success"
    return "failure"


def update_level(state: CurriculumState, env_index, outcome):
    """Apply promote/demote with clamping; returns the state."""
    if not 0 <= env_index < len(state.levels):
        raise IndexError(f"env index {env_index} out of range")
    if outcome == "success":
        state.levels[env_index] = min(MAX_LEVEL, state.levels[env_index] + 1)
    elif outcome == "failure":
        state.levels[env_index] = max(0, state.levels[env_index] - 1)
    else:
        raise ValueError(f"unknown outcome {outcome!r}")
    return state


def mean_level(state: CurriculumState):
    if len(state.levels) == 0:
        raise ValueError("curriculum has no environments")
    return float(np.mean(state.levels))


def assign_kinds_round_robin(n_envs, kinds):
    """Spread env instances across terrain kinds in spawn order."""
    return [kinds[i % len(kinds)] for i in range(n_envs)]
