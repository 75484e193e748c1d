"""Parameterized planar legged morphologies.

A morphology is a rigid body with ``n_legs`` serial-chain legs hanging from
hip points spaced along the body axis.  Joint angles are measured cumulatively
from straight-down, so the nominal pose bends each leg slightly and puts the
foot roughly under its hip.  Legs are treated as light relative to the body:
contact forces act on the base, while each joint swings against one effective
leg inertia (the full leg as a rod about its end).
"""

from dataclasses import dataclass, field

import numpy as np

# Acceleration-level servo targets used to size kp/kd per morphology:
# natural frequency ~25 rad/s, damping ratio ~0.8 at the effective inertia.
_SERVO_OMEGA = 25.0
_SERVO_ZETA = 0.8

_NOMINAL_POSE = {
    1: (0.0,),
    2: (0.35, -0.7),
    3: (0.3, -0.5, 0.2),
}


@dataclass(frozen=True)
class Morphology:
    name: str
    n_legs: int
    joints_per_leg: int
    limb_lengths: tuple      # per joint within a leg, m
    limb_masses: tuple       # per joint within a leg, kg
    body_length: float       # m
    body_mass: float         # kg
    kp: float                # motor gain, N m / rad
    kd: float                # motor damping, N m s / rad
    tau_max: float           # torque clamp, N m
    action_scale: float = 0.5  # joint-position offset bound, rad

    def __post_init__(self):
        if self.n_legs < 1 or self.joints_per_leg < 1:
            raise ValueError("morphology needs n_legs >= 1 and joints_per_leg >= 1")
        if len(self.limb_lengths) != self.joints_per_leg:
            raise ValueError("limb_lengths must have one entry per joint")
        if len(self.limb_masses) != self.joints_per_leg:
            raise ValueError("limb_masses must have one entry per joint")
        vals = (*self.limb_lengths, *self.limb_masses, self.body_length,
                self.body_mass, self.kp, self.kd, self.tau_max, self.action_scale)
        if any(v <= 0.0 for v in vals):
            raise ValueError(f"{self.name}: all physical parameters must be positive")

    @property
    def act_dim(self):
        return self.n_legs * self.joints_per_leg

    @property
    def obs_dim(self):
        # [lin vel (2), ang vel (1), pitch (1), q, qd, contacts, command (2)]
        return 6 + 2 * self.act_dim + self.n_legs

    @property
    def leg_mass(self):
        return float(sum(self.limb_masses))

    @property
    def leg_length(self):
        return float(sum(self.limb_lengths))

    @property
    def m_total(self):
        return self.body_mass + self.n_legs * self.leg_mass

    @property
    def joint_inertia(self):
        # full leg as a uniform rod about its end; one value for every joint
        return (1.0 / 3.0) * self.leg_mass * self.leg_length**2

    @property
    def body_inertia(self):
        rod = self.body_mass * self.body_length**2 / 12.0
        return rod + self.leg_mass * float(np.sum(self.hip_x**2))

    @property
    def hip_x(self):
        """Hip attachment x-offsets in the body frame, evenly spread."""
        half = self.body_length / 2.0
        if self.n_legs == 1:
            return np.array([0.0])
        return np.linspace(-half, half, self.n_legs)

    @property
    def q_nominal(self):
        pose = _NOMINAL_POSE.get(self.joints_per_leg)
        if pose is None:
            # generic slight bend alternating around straight-down
            pose = tuple(0.3 * (-1.0) ** j for j in range(self.joints_per_leg))
        return np.tile(pose, self.n_legs).astype(np.float64)

    @property
    def stand_height(self):
        """Hip-to-foot drop at the nominal pose."""
        pose = self.q_nominal[: self.joints_per_leg]
        alpha = np.cumsum(pose)
        return float(np.sum(np.asarray(self.limb_lengths) * np.cos(alpha)))


def _build(name, n_legs, joints, lengths, masses, body_length, body_mass):
    leg_mass = sum(masses)
    leg_len = sum(lengths)
    inertia = (1.0 / 3.0) * leg_mass * leg_len**2
    kp = _SERVO_OMEGA**2 * inertia
    kd = 2.0 * _SERVO_ZETA * _SERVO_OMEGA * inertia
    return Morphology(name, n_legs, joints, tuple(lengths), tuple(masses),
                      body_length, body_mass, kp=kp, kd=kd, tau_max=kp)


REGISTRY = {
    "biped-2": lambda: _build("biped-2", 2, 2, (0.25, 0.25), (0.5, 0.5), 0.4, 6.0),
    # prototype platform for pretraining
    "quad-2": lambda: _build("quad-2", 4, 2, (0.25, 0.25), (0.5, 0.5), 0.6, 10.0),
    # same interface dims as quad-2, different plant (transfer target)
    "quad-2b": lambda: _build("quad-2b", 4, 2, (0.22, 0.3), (0.7, 0.4), 0.7, 13.0),
    "quad-3": lambda: _build("quad-3", 4, 3, (0.2, 0.2, 0.2), (0.4, 0.4, 0.4), 0.6, 10.0),
    "hexapod-2": lambda: _build("hexapod-2", 6, 2, (0.25, 0.25), (0.5, 0.5), 1.0, 14.0),
    "hexapod-3": lambda: _build("hexapod-3", 6, 3, (0.2, 0.2, 0.2), (0.4, 0.4, 0.4), 1.0, 14.0),
}


def get_morphology(name):
    if name not in REGISTRY:
        raise ValueError(f"unknown morphology {name!r}; have {sorted(REGISTRY)}")
    return REGISTRY[name]()


def generate_morphology(n_legs, joints_per_leg, seed, name=None):
    """Randomized family member: jittered lengths, masses, and body."""
    rng = np.random.default_rng(seed)
    lengths = tuple(rng.uniform(0.18, 0.3, joints_per_leg).round(3))
    masses = tuple(rng.uniform(0.3, 0.7, joints_per_leg).round(3))
    body_length = float(rng.uniform(0.15, 0.25) * n_legs)
    body_mass = float(rng.uniform(2.0, 3.5) * n_legs)
    return _build(name or f"gen-{n_legs}x{joints_per_leg}-{seed}",
                  n_legs, joints_per_leg, lengths, masses, body_length, body_mass)
