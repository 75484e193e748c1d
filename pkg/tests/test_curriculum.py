"""Curriculum state-machine tests: judgement rule, promote/demote/clamp."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentloco import curriculum as cur


def _info(traversed, track_length=2.5, fell=False):
    return {"traversed": traversed, "track_length": track_length, "fell": fell}


def test_full_traversal_no_fall_is_success():
    assert cur.judge_episode(_info(2.5)) == "success"


def test_fall_is_always_failure():
    assert cur.judge_episode(_info(2.5, fell=True)) == "failure"


def test_boundary_traversal_is_inclusive():
    assert cur.judge_episode(_info(0.8 * 2.5)) == "success"
    assert cur.judge_episode(_info(0.8 * 2.5 - 1e-9)) == "failure"


def test_promote_clamps_at_top():
    state = cur.CurriculumState.create(1, ["boxes"], start_level=9)
    cur.update_level(state, 0, "success")
    assert state.levels[0] == 9


def test_demote_clamps_at_bottom():
    state = cur.CurriculumState.create(1, ["boxes"], start_level=0)
    cur.update_level(state, 0, "failure")
    assert state.levels[0] == 0


def test_sequence_fixture_ssfs():
    state = cur.CurriculumState.create(1, ["boxes"], start_level=0)
    seen = []
    for outcome in ["success", "success", "failure", "success"]:
        cur.update_level(state, 0, outcome)
        seen.append(int(state.levels[0]))
    assert seen == [1, 2, 1, 2]


def test_update_rejects_bad_inputs():
    state = cur.CurriculumState.create(2, ["boxes", "boxes"])
    with pytest.raises(IndexError):
        cur.update_level(state, 5, "success")
    with pytest.raises(ValueError):
        cur.update_level(state, 0, "draw")


def test_mean_level_trivial_cases():
    state = cur.CurriculumState.create(4, ["boxes"] * 4, start_level=5)
    assert cur.mean_level(state) == 5.0
    state.levels[:] = [0, 9, 0, 9]
    assert cur.mean_level(state) == 4.5


def test_mean_level_matches_recomputation():
    rng = np.random.default_rng(0)
    levels = rng.integers(0, 10, 100)
    state = cur.CurriculumState(levels.copy(), ["boxes"] * 100)
    want = sum(int(v) for v in levels) / 100.0
    assert abs(cur.mean_level(state) - want) < 1e-12


def test_mean_level_requires_envs():
    state = cur.CurriculumState(np.array([], dtype=int), [])
    with pytest.raises(ValueError):
        cur.mean_level(state)


@given(st.lists(st.sampled_from(["success", "failure"]), min_size=1, max_size=200))
@settings(max_examples=60, deadline=None)
def test_level_changes_at_most_one_and_stays_bounded(outcomes):
    state = cur.CurriculumState.create(1, ["boxes"], start_level=3)
    prev = int(state.levels[0])
    for outcome in outcomes:
        cur.update_level(state, 0, outcome)
        now = int(state.levels[0])
        assert abs(now - prev) <= 1
        assert 0 <= now <= 9
        assert 0.0 <= cur.mean_level(state) <= 9.0
        prev = now


def test_round_robin_assignment():
    kinds = ["a", "b", "c"]
    got = cur.assign_kinds_round_robin(7, kinds)
    assert got == ["a", "b", "c", "a", "b", "c", "a"]
