"""Terrain generation tests: difficulty interpolation, determinism, and
profile shape contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentloco.envs import terrain as tr


def test_pyramid_stairs_level0_step_height():
    assert tr.difficulty_param("pyramid_stairs", 0) == pytest.approx(0.05)


def test_pyramid_slope_level9_grade():
    assert tr.difficulty_param("pyramid_slope", 9) == pytest.approx(0.8)


def test_random_rough_level4_quantized_amplitude():
    # 0.02 + (4/9)*0.28 = 0.1444..., snapped to the 0.02 noise step -> 0.14
    amp = tr.difficulty_param("random_rough", 4)
    assert amp == pytest.approx(0.14)
    t = tr.generate_terrain("random_rough", 4, seed=3)
    assert np.all(np.abs(t.heights) <= amp + 1e-12)


def test_unknown_kind_and_level_rejected():
    with pytest.raises(ValueError):
        tr.difficulty_param("lava", 0)
    with pytest.raises(ValueError):
        tr.difficulty_param("boxes", 10)
    with pytest.raises(ValueError):
        tr.generate_terrain("boxes", -1, 0)


def test_terrain_determinism_bit_identical():
    a = tr.generate_terrain("boxes", 5, seed=42)
    b = tr.generate_terrain("boxes", 5, seed=42)
    assert np.array_equal(a.heights, b.heights)
    c = tr.generate_terrain("boxes", 5, seed=43)
    assert not np.array_equal(a.heights, c.heights)


@pytest.mark.parametrize("kind", tr.KINDS)
def test_monotone_difficulty_in_level(kind):
    params = [tr.difficulty_param(kind, lvl) for lvl in range(10)]
    assert all(b > a for a, b in zip(params, params[1:]))


@pytest.mark.parametrize("kind", tr.KINDS)
def test_profiles_are_finite_and_flat_at_spawn(kind):
    t = tr.generate_terrain(kind, 7, seed=1)
    assert np.all(np.isfinite(t.heights))
    # the spawn region (x <= 0.2) stays at height zero for every kind
    xs = tr.GRID_X0 + tr.GRID_DX * np.arange(tr.GRID_N)
    assert np.all(t.heights[xs <= 0.2] == 0.0)


def test_stair_geometry_uses_step_width():
    t = tr.generate_terrain("pyramid_stairs", 9, seed=0)
    # at x = border + 0.15 (inside first step) height is one step
    assert t.height_at(tr.STAIR_BORDER + 0.15) == pytest.approx(0.8)
    assert t.height_at(tr.STAIR_BORDER + 0.35) == pytest.approx(1.6)


def test_inverted_kinds_descend():
    stairs = tr.generate_terrain("inverted_pyramid_stairs", 5, seed=0)
    slope = tr.generate_terrain("inverted_pyramid_slope", 5, seed=0)
    assert stairs.height_at(2.0) < 0.0
    assert slope.height_at(2.0) < 0.0


def test_slope_is_continuous_and_linear():
    t = tr.generate_terrain("pyramid_slope", 9, seed=0)
    xs = np.linspace(0.5, 2.5, 200)
    hs = t.height_at(xs)
    steps = np.abs(np.diff(hs))
    assert np.max(steps) < 0.02  # no jumps at grid boundaries


def test_height_lookup_clamps_at_grid_edges():
    t = tr.generate_terrain("pyramid_stairs", 3, seed=0)
    assert t.height_at(-50.0) == t.heights[0]
    assert t.height_at(50.0) == t.heights[-1]


@given(st.sampled_from(tr.KINDS), st.integers(0, 9), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_difficulty_matches_formula(kind, level, seed):
    lo, hi = tr.DIFFICULTY_RANGES[kind]
    want = lo + (level / 9.0) * (hi - lo)
    if kind == "random_rough":
        want = round(want / 0.02) * 0.02
    t = tr.generate_terrain(kind, level, seed)
    assert t.difficulty == pytest.approx(want)
    assert t.level == level


def test_csv_export_roundtrip(tmp_path):
    t = tr.generate_terrain("random_rough", 2, seed=9)
    path = tmp_path / "profile.csv"
    t.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "x,height"
    assert len(rows) == 1 + tr.GRID_N
    x0, h0 = map(float, rows[1].split(","))
    assert x0 == tr.GRID_X0
    assert h0 == t.heights[0]
