"""Environment dynamics tests: morphology bookkeeping, reset/step contracts,
standing stability, integrator energy drift, and kernel-backend agreement."""

import numpy as np
import pytest

from latentloco.envs import (
    EnvBatch,
    EnvConfig,
    KINDS,
    PlanarEnv,
    RewardWeights,
    generate_morphology,
    generate_terrain,
    get_backend,
    get_morphology,
    initial_state,
    observe,
    reward,
    sample_command,
    step_once,
)
from latentloco.envs.morphology import REGISTRY, Morphology


# --- morphology ---------------------------------------------------------------

def test_quad2_dims():
    m = get_morphology("quad-2")
    assert m.act_dim == 8
    assert m.obs_dim == 26


def test_hexapod2_dims():
    m = get_morphology("hexapod-2")
    assert m.act_dim == 12
    assert m.obs_dim == 36


def test_registry_exposes_four_distinct_interface_shapes():
    shapes = {(REGISTRY[name]().obs_dim, REGISTRY[name]().act_dim)
              for name in REGISTRY}
    assert len(shapes) >= 4


def test_morphology_rejects_nonpositive_parameters():
    with pytest.raises(ValueError):
        Morphology("bad", 2, 2, (0.25, 0.25), (0.5, -0.5), 0.4, 6.0,
                   kp=10, kd=1, tau_max=10)
    with pytest.raises(ValueError):
        Morphology("bad", 0, 2, (0.25, 0.25), (0.5, 0.5), 0.4, 6.0,
                   kp=10, kd=1, tau_max=10)


def test_generated_morphology_deterministic():
    a = generate_morphology(4, 2, seed=7)
    b = generate_morphology(4, 2, seed=7)
    assert a == b
    assert a.obs_dim == 6 + 2 * a.act_dim + a.n_legs


def test_unknown_morphology_name():
    with pytest.raises(ValueError, match="unknown morphology"):
        get_morphology("octopod")


# --- commands and observations ---------------------------------------------------

def test_command_bounds_and_determinism():
    rng = np.random.default_rng(0)
    draws = np.array([sample_command(rng) for _ in range(10_000)])
    assert np.all(draws[:, 0] >= 0.3) and np.all(draws[:, 0] <= 1.0)
    assert np.all(np.abs(draws[:, 1]) <= 0.5)
    again = np.array([sample_command(np.random.default_rng(0))
                      for _ in range(1)])
    assert np.array_equal(again[0], draws[0])


def test_command_velocity_mean():
    rng = np.random.default_rng(1)
    draws = np.array([sample_command(rng)[0] for _ in range(100_000)])
    assert abs(draws.mean() - 0.65) / 0.65 < 0.01


def test_observation_layout_and_zero_state():
    m = get_morphology("quad-2")
    terr = generate_terrain("pyramid_slope", 0, 0)
    state = initial_state(m, terr, command=(0.4, -0.1))
    state.base[:] = 0.0
    state.q[:] = 0.0
    obs = observe(m, state)
    assert obs.shape == (26,)
    assert np.array_equal(obs[:-2], np.zeros(24))
    assert np.array_equal(obs[-2:], [0.4, -0.1])


# --- reward ------------------------------------------------------------------------

def test_reward_perfect_tracking_value():
    m = get_morphology("quad-2")
    terr = generate_terrain("pyramid_slope", 0, 0)
    state = initial_state(m, terr, command=(0.7, 0.2))
    state.base[3] = 0.7   # vx == cmd_v
    state.base[5] = 0.2   # omega == cmd_rate
    total, comp = reward(state, np.zeros(m.act_dim), state.command)
    assert total == pytest.approx(1.6)
    assert comp["alive"] == pytest.approx(0.1)


def test_reward_fall_includes_penalty():
    m = get_morphology("quad-2")
    terr = generate_terrain("pyramid_slope", 0, 0)
    state = initial_state(m, terr, command=(0.7, 0.0))
    total_ok, _ = reward(state, np.zeros(m.act_dim), state.command, fell=False)
    total_fall, comp = reward(state, np.zeros(m.act_dim), state.command, fell=True)
    assert total_fall == pytest.approx(total_ok - 2.0)
    assert comp["fall"] == -2.0


def test_reward_matches_component_recomputation():
    m = get_morphology("quad-2")
    terr = generate_terrain("random_rough", 3, 0)
    rng = np.random.default_rng(5)
    w = RewardWeights()
    for _ in range(50):
        state = initial_state(m, terr, command=sample_command(rng))
        state.base[:] = rng.standard_normal(6)
        a = rng.uniform(-0.5, 0.5, m.act_dim)
        total, comp = reward(state, a, state.command, w)
        # independent recomputation from the definition
        want = (w.track_vel * np.exp(-(state.base[3] - state.command[0]) ** 2 / w.sigma_sq)
                + w.track_rate * np.exp(-(state.base[5] - state.command[1]) ** 2 / w.sigma_sq)
                + w.alive - w.action_cost * np.sum(a * a))
        assert abs(total - want) < 1e-12
        assert abs(total - sum(comp.values())) < 1e-15


# --- reset ---------------------------------------------------------------------------

def test_reset_deterministic_and_above_terrain():
    m = get_morphology("quad-2")
    for kind in KINDS:
        env = PlanarEnv(m, kind, 6, seed=3)
        obs1 = env.reset()
        s = env.state()
        terr = env.terrain
        foot_ground = terr.height_at(m.hip_x)
        assert s.base[1] > np.max(foot_ground)  # no initial penetration
        env2 = PlanarEnv(m, kind, 6, seed=3)
        assert np.array_equal(env2.reset(), obs1)


def test_same_seed_different_morphologies_share_command():
    e1 = PlanarEnv(get_morphology("quad-2"), "boxes", 2, seed=11)
    e2 = PlanarEnv(get_morphology("hexapod-2"), "boxes", 2, seed=11)
    assert e1.state().command.shape == (2,)
    assert np.array_equal(e1.state().command, e2.state().command)
    assert e1.reset().shape != e2.reset().shape


# --- step ---------------------------------------------------------------------------

def test_standing_zero_action_survives_full_horizon():
    m = get_morphology("quad-2")
    env = PlanarEnv(m, "pyramid_slope", 0, seed=0)
    env.reset()
    for t in range(500):
        _, _, done, info = env.step(np.zeros(m.act_dim))
        if t < 499:
            assert not done, f"fell at step {t}"
    assert done and not info["fell"]


def test_done_exactly_at_horizon():
    m = get_morphology("quad-2")
    env = PlanarEnv(m, "pyramid_slope", 0, seed=1)
    env.reset()
    for t in range(499):
        _, _, done, _ = env.step(np.zeros(m.act_dim))
        assert not done
    _, _, done, info = env.step(np.zeros(m.act_dim))
    assert done
    assert info["episode_length"] == 500


def test_energy_drift_in_free_flight():
    # airborne, zero joint torque (nominal pose, zero velocities): the only
    # force is gravity, so per-step relative drift must stay below 1e-3.
    m = get_morphology("quad-2")
    terr = generate_terrain("pyramid_slope", 0, 0)
    state = initial_state(m, terr, command=(0.5, 0.0))
    state.base[1] = 25.0  # stays clear of the ground for all 100 steps
    state.base[3] = 2.0
    state.base[5] = 0.3

    def energy(s):
        ke = 0.5 * m.m_total * (s.base[3] ** 2 + s.base[4] ** 2)
        rot = 0.5 * m.body_inertia * s.base[5] ** 2
        return ke + rot + m.m_total * 9.81 * s.base[1]

    e0 = energy(state)
    prev = e0
    for _ in range(100):
        state, _, _, _ = step_once(m, terr, state, np.zeros(m.act_dim))
        assert not np.any(state.contact > 0.0)
        e = energy(state)
        assert abs(e - prev) / e0 < 1e-3
        prev = e


def test_step_once_is_pure():
    m = get_morphology("quad-2")
    terr = generate_terrain("random_rough", 2, 4)
    state = initial_state(m, terr, command=(0.5, 0.0))
    snapshot = state.copy()
    a = np.full(m.act_dim, 0.3)
    s1, r1, d1, _ = step_once(m, terr, state, a)
    s2, r2, d2, _ = step_once(m, terr, state, a)
    assert np.array_equal(state.base, snapshot.base)
    assert np.array_equal(state.q, snapshot.q)
    assert np.array_equal(s1.base, s2.base)
    assert r1 == r2 and d1 == d2


def test_step_rejects_non_finite_action():
    m = get_morphology("quad-2")
    env = PlanarEnv(m, "boxes", 0, seed=0)
    env.reset()
    bad = np.zeros(m.act_dim)
    bad[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        env.step(bad)


def test_kernel_backends_agree_bitwise():
    py = get_backend("python")
    m = get_morphology("quad-3")
    terr = generate_terrain("boxes", 4, seed=2)
    rng = np.random.default_rng(0)
    s_default = initial_state(m, terr, command=(0.6, 0.1))
    s_python = s_default.copy()
    for _ in range(200):
        a = rng.uniform(-0.5, 0.5, m.act_dim)
        s_default, r1, d1, _ = step_once(m, terr, s_default, a)
        s_python, r2, d2, _ = step_once(m, terr, s_python, a, kernel=py)
        assert np.array_equal(s_default.base, s_python.base)
        assert np.array_equal(s_default.q, s_python.q)
        assert np.array_equal(s_default.qd, s_python.qd)
        assert np.array_equal(s_default.contact, s_python.contact)
        assert r1 == r2 and d1 == d2
        if d1:
            break


def test_batch_step_matches_single_env():
    m = get_morphology("quad-2")
    batch = EnvBatch(m, ["boxes", "random_rough"], [1, 2], seed=5)
    single = PlanarEnv(m, "boxes", 1, seed=0)
    # env 0 of the batch and a single env built from the same state evolve
    # identically under the same actions
    terr = batch.terrains[0]
    state = initial_state(m, terr, batch.commands[0])
    state.base[:] = batch.base[0]
    state.q[:] = batch.q[0]
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = rng.uniform(-0.5, 0.5, m.act_dim)
        actions = np.vstack([a, np.zeros(m.act_dim)])
        batch.step(actions)
        state, _, done, _ = step_once(m, terr, state, a)
        assert np.array_equal(batch.base[0], state.base)
        if done:
            break


def test_contact_forces_non_negative_and_step_count_bounded():
    m = get_morphology("quad-2")
    env = PlanarEnv(m, "random_rough", 5, seed=6)
    env.reset()
    rng = np.random.default_rng(1)
    for _ in range(200):
        _, _, done, _ = env.step(rng.uniform(-0.5, 0.5, m.act_dim))
        s = env.state()
        assert np.all(s.contact >= 0.0)
        assert s.step_count <= env.cfg.horizon
        if done:
            break
