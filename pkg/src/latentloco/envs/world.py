"""Velocity-command locomotion environments over procedural tracks.

`EnvBatch` steps many same-morphology robots in lockstep through the batched
kernel; `PlanarEnv` is the single-robot view used by tests and evaluation.
Episodes end on a fall (pitch limit or base too close to the ground) or at the
horizon; the per-episode info carries traversed distance and tracking sums for
curriculum judgement and metrics.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import terrain as terrain_mod
from .kernels import step_batch
from .morphology import Morphology
from .terrain import GRID_DX, GRID_N, GRID_X0, Terrain, generate_terrain


@dataclass(frozen=True)
class RewardWeights:
    track_vel: float = 1.0
    track_rate: float = 0.5
    alive: float = 0.1
    action_cost: float = 0.005
    fall_penalty: float = 2.0
    sigma_sq: float = 0.25  # squared tracking bandwidth for both exp terms


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.02
    horizon: int = 500
    gravity: float = 9.81
    contact_stiffness: float = 5000.0
    contact_damping: float = 100.0
    friction_mu: float = 1.0
    friction_visc: float = 150.0
    n_substeps: int = 4
    max_normal_force: float = 2000.0
    fall_pitch: float = 1.0
    fall_margin: float = 0.05
    cmd_v_range: tuple = (0.3, 1.0)
    cmd_rate_range: tuple = (-0.5, 0.5)
    spawn_clearance: float = 0.005
    rewards: RewardWeights = RewardWeights()


@dataclass
class EnvState:
    """Full single-env state snapshot (the functional-step interface)."""

    base: np.ndarray      # [x, z, pitch, vx, vz, omega]
    q: np.ndarray
    qd: np.ndarray
    contact: np.ndarray   # per-leg normal force, N
    command: np.ndarray   # [target forward velocity, target pitch rate]
    step_count: int = 0
    episode_done: bool = False

    def copy(self):
        return EnvState(self.base.copy(), self.q.copy(), self.qd.copy(),
                        self.contact.copy(), self.command.copy(),
                        self.step_count, self.episode_done)


def sample_command(rng, cfg=EnvConfig()):
    """Per-episode velocity command draw."""
    return np.array([
        rng.uniform(cfg.cmd_v_range[0], cfg.cmd_v_range[1]),
        rng.uniform(cfg.cmd_rate_range[0], cfg.cmd_rate_range[1]),
    ])


def observe(morph, state):
    """Proprioception + contact forces + command, per the fixed layout."""
    normals = state.contact / (morph.m_total * 9.81)
    return np.concatenate([
        state.base[3:6],            # vx, vz, omega
        state.base[2:3],            # pitch
        state.q,
        state.qd,
        normals,
        state.command,
    ])


def reward(state, action, command, weights=RewardWeights(), fell=False):
    """Tracking-exp reward with alive bonus, action cost, and fall penalty.

    Uses the post-step state; returns (total, components).
    """
    vx, omega = state.base[3], state.base[5]
    comp = {
        "track_vel": weights.track_vel * math.exp(-((vx - command[0]) ** 2) / weights.sigma_sq),
        "track_rate": weights.track_rate * math.exp(-((omega - command[1]) ** 2) / weights.sigma_sq),
        "alive": weights.alive,
        "action_cost": -weights.action_cost * float(np.sum(np.asarray(action) ** 2)),
        "fall": -weights.fall_penalty if fell else 0.0,
    }
    return sum(comp.values()), comp


class EnvBatch:
    """n same-morphology robots, each with its own terrain kind/level/rng."""

    def __init__(self, morph: Morphology, kinds, levels, seed, cfg: EnvConfig = EnvConfig()):
        self.morph = morph
        self.cfg = cfg
        self.n = len(kinds)
        self.kinds = list(kinds)
        self.levels = np.asarray(levels, dtype=int).copy()
        if len(self.levels) != self.n:
            raise ValueError("kinds and levels must have equal length")

        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.rngs = [np.random.default_rng(s) for s in seq.spawn(self.n)]

        A, L = morph.act_dim, morph.n_legs
        self.base = np.zeros((self.n, 6))
        self.q = np.zeros((self.n, A))
        self.qd = np.zeros((self.n, A))
        self.contact = np.zeros((self.n, L))
        self.commands = np.zeros((self.n, 2))
        self.fallen = np.zeros(self.n, dtype=np.uint8)
        self.step_counts = np.zeros(self.n, dtype=int)
        self.heights = np.zeros((self.n, GRID_N))
        self.linear = np.zeros(self.n, dtype=np.uint8)
        self.terrains = [None] * self.n

        # per-episode accounting
        self.start_x = np.zeros(self.n)
        self.max_x = np.zeros(self.n)
        self.ep_return = np.zeros(self.n)
        self.vel_err_sum = np.zeros(self.n)
        self.rate_err_sum = np.zeros(self.n)

        for i in range(self.n):
            self.reset_env(i)

    # -- episode management --------------------------------------------------

    def reset_env(self, i, level=None):
        """Respawn env i on a freshly generated track at its (new) level."""
        if level is not None:
            self.levels[i] = int(np.clip(level, 0, 9))
        rng = self.rngs[i]
        self.commands[i] = sample_command(rng, self.cfg)
        tseed = int(rng.integers(0, 2**31 - 1))
        terr = generate_terrain(self.kinds[i], int(self.levels[i]), tseed)
        self.terrains[i] = terr
        self.heights[i] = terr.heights
        self.linear[i] = 1 if terr.linear_interp else 0

        morph = self.morph
        self.q[i] = morph.q_nominal
        self.qd[i] = 0.0
        self.contact[i] = 0.0
        foot_x = morph.hip_x  # nominal pose puts feet near their hips
        ground = float(np.max(terr.height_at(foot_x)))
        self.base[i] = (0.0, morph.stand_height + ground + self.cfg.spawn_clearance,
                        0.0, 0.0, 0.0, 0.0)
        self.fallen[i] = 0
        self.step_counts[i] = 0
        self.start_x[i] = 0.0
        self.max_x[i] = 0.0
        self.ep_return[i] = 0.0
        self.vel_err_sum[i] = 0.0
        self.rate_err_sum[i] = 0.0
        return self._observe_one(i)

    def observe(self):
        g = self.morph.m_total * 9.81
        return np.concatenate([
            self.base[:, 3:6],
            self.base[:, 2:3],
            self.q,
            self.qd,
            self.contact / g,
            self.commands,
        ], axis=1)

    def _observe_one(self, i):
        return self.observe()[i]

    def step(self, actions, on_episode_end=None):
        """Step all envs; returns (obs, rewards, dones, infos).

        ``infos`` maps env index -> episode summary for envs that finished
        this step.  Finished envs are reset (optionally at a new level
        returned by ``on_episode_end(i, info)``) before the obs is built.
        """
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n, self.morph.act_dim):
            raise ValueError(f"actions shape {actions.shape}, "
                             f"want {(self.n, self.morph.act_dim)}")
        if not np.all(np.isfinite(actions)):
            bad = np.argwhere(~np.isfinite(actions))[0]
            raise ValueError(f"non-finite action for env {bad[0]} dim {bad[1]}")
        clipped = np.clip(actions, -self.morph.action_scale, self.morph.action_scale)

        m = self.morph
        cfg = self.cfg
        step_batch(self.base, self.q, self.qd, self.contact, clipped, self.fallen,
                   np.ascontiguousarray(m.hip_x), np.asarray(m.limb_lengths, dtype=np.float64),
                   m.q_nominal, m.joint_inertia,
                   m.m_total, m.body_inertia, m.kp, m.kd, m.tau_max, m.action_scale,
                   self.heights, self.linear, GRID_X0, GRID_DX,
                   cfg.contact_stiffness, cfg.contact_damping, cfg.friction_mu,
                   cfg.friction_visc, cfg.max_normal_force,
                   cfg.gravity, cfg.dt, cfg.fall_pitch, cfg.fall_margin,
                   cfg.n_substeps)

        self.step_counts += 1
        self.max_x = np.maximum(self.max_x, self.base[:, 0])
        self.vel_err_sum += np.abs(self.base[:, 3] - self.commands[:, 0])
        self.rate_err_sum += np.abs(self.base[:, 5] - self.commands[:, 1])

        w = cfg.rewards
        fell = self.fallen.astype(bool)
        horizon = self.step_counts >= cfg.horizon
        dones = fell | horizon
        track_v = w.track_vel * np.exp(-((self.base[:, 3] - self.commands[:, 0]) ** 2) / w.sigma_sq)
        track_w = w.track_rate * np.exp(-((self.base[:, 5] - self.commands[:, 1]) ** 2) / w.sigma_sq)
        act_cost = w.action_cost * np.sum(clipped * clipped, axis=1)
        rewards = track_v + track_w + w.alive - act_cost - w.fall_penalty * fell
        self.ep_return += rewards

        infos = {}
        for i in np.flatnonzero(dones):
            n_steps = int(self.step_counts[i])
            info = {
                "traversed": float(self.max_x[i] - self.start_x[i]),
                "track_length": self.terrains[i].track_length,
                "fell": bool(fell[i]),
                "episode_return": float(self.ep_return[i]),
                "episode_length": n_steps,
                "vel_err": float(self.vel_err_sum[i] / n_steps),
                "rate_err": float(self.rate_err_sum[i] / n_steps),
                "kind": self.kinds[i],
                "level": int(self.levels[i]),
            }
            infos[int(i)] = info
            new_level = None
            if on_episode_end is not None:
                new_level = on_episode_end(int(i), info)
            self.reset_env(i, level=new_level)

        return self.observe(), rewards, dones, infos


class PlanarEnv:
    """Single-robot convenience wrapper over a batch of one."""

    def __init__(self, morph, kind, level, seed, cfg: EnvConfig = EnvConfig()):
        self._batch = EnvBatch(morph, [kind], [level], seed, cfg)
        self.morph = morph
        self.cfg = cfg

    @property
    def terrain(self) -> Terrain:
        return self._batch.terrains[0]

    def reset(self, level=None):
        return self._batch.reset_env(0, level=level)

    def step(self, action):
        obs, rewards, dones, infos = self._batch.step(
            np.asarray(action)[None, :],
            on_episode_end=lambda i, info: self._batch.levels[0],
        )
        return obs[0], float(rewards[0]), bool(dones[0]), infos.get(0)

    def state(self) -> EnvState:
        b = self._batch
        return EnvState(b.base[0].copy(), b.q[0].copy(), b.qd[0].copy(),
                        b.contact[0].copy(), b.commands[0].copy(),
                        int(b.step_counts[0]), bool(b.fallen[0]))


def initial_state(morph, terr: Terrain, command, cfg: EnvConfig = EnvConfig()):
    """Nominal-pose spawn at the track start (functional-step interface)."""
    ground = float(np.max(terr.height_at(morph.hip_x)))
    base = np.array([0.0, morph.stand_height + ground + cfg.spawn_clearance,
                     0.0, 0.0, 0.0, 0.0])
    return EnvState(base, morph.q_nominal.copy(), np.zeros(morph.act_dim),
                    np.zeros(morph.n_legs), np.asarray(command, dtype=np.float64))


def step_once(morph, terr: Terrain, state: EnvState, action,
              cfg: EnvConfig = EnvConfig(), kernel=None):
    """Pure single-env step: returns (state', reward, done, info); no mutation."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (morph.act_dim,):
        raise ValueError(f"action shape {action.shape}, want ({morph.act_dim},)")
    if not np.all(np.isfinite(action)):
        raise ValueError("non-finite action")
    kern = kernel or step_batch
    new = state.copy()
    clipped = np.clip(action, -morph.action_scale, morph.action_scale)

    base = new.base[None, :].copy()
    q = new.q[None, :].copy()
    qd = new.qd[None, :].copy()
    contact = new.contact[None, :].copy()
    fallen = np.zeros(1, dtype=np.uint8)
    heights = terr.heights[None, :].copy()
    linear = np.array([1 if terr.linear_interp else 0], dtype=np.uint8)

    kern(base, q, qd, contact, clipped[None, :].copy(), fallen,
         np.ascontiguousarray(morph.hip_x),
         np.asarray(morph.limb_lengths, dtype=np.float64),
         morph.q_nominal, morph.joint_inertia,
         morph.m_total, morph.body_inertia, morph.kp, morph.kd,
         morph.tau_max, morph.action_scale,
         heights, linear, GRID_X0, GRID_DX,
         cfg.contact_stiffness, cfg.contact_damping, cfg.friction_mu,
         cfg.friction_visc, cfg.max_normal_force,
         cfg.gravity, cfg.dt, cfg.fall_pitch, cfg.fall_margin,
         cfg.n_substeps)

    new.base, new.q, new.qd, new.contact = base[0], q[0], qd[0], contact[0]
    new.step_count = state.step_count + 1
    fell = bool(fallen[0])
    done = fell or new.step_count >= cfg.horizon
    new.episode_done = done

    w = cfg.rewards
    vx, omega = new.base[3], new.base[5]
    comp = {
        "track_vel": w.track_vel * math.exp(-((vx - new.command[0]) ** 2) / w.sigma_sq),
        "track_rate": w.track_rate * math.exp(-((omega - new.command[1]) ** 2) / w.sigma_sq),
        "alive": w.alive,
        "action_cost": -w.action_cost * float(np.sum(clipped * clipped)),
        "fall": -w.fall_penalty if fell else 0.0,
    }
    total = sum(comp.values())
    info = {"fell": fell, "components": comp, "traversed": float(new.base[0]),
            "track_length": terr.track_length}
    return new, total, done, info
