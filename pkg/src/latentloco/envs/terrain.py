"""Procedural 1-D heightfield tracks: six kinds, ten difficulty levels.

Each track is a sampled height profile h(x) on a fixed uniform grid.  The
difficulty-bearing parameter interpolates linearly over levels 0..9 inside the
kind's configured range.  Stairs, boxes and rough terrain are
piecewise-constant (floor-index lookup); slopes are continuous (linear
interpolation), which the step kernel selects via a per-track flag.
"""

from dataclasses import dataclass

import numpy as np

GRID_X0 = -1.0
GRID_DX = 0.05
GRID_N = 240  # covers x in [-1.0, 10.95]

TRACK_LENGTH = 2.5  # success-judgement span in meters, from the spawn point

KINDS = (
    "pyramid_stairs",
    "inverted_pyramid_stairs",
    "boxes",
    "random_rough",
    "pyramid_slope",
    "inverted_pyramid_slope",
)

# (min, max) of the difficulty-bearing parameter per kind
DIFFICULTY_RANGES = {
    "pyramid_stairs": (0.05, 0.8),           # step height, m
    "inverted_pyramid_stairs": (0.05, 0.8),  # step height, m
    "boxes": (0.05, 0.8),                    # max grid-cell height, m
    "random_rough": (0.02, 0.30),            # noise amplitude, m
    "pyramid_slope": (0.0, 0.8),             # grade
    "inverted_pyramid_slope": (0.0, 0.8),    # grade
}

STAIR_STEP_WIDTH = 0.3
STAIR_BORDER = 1.0
STAIR_PLATFORM = 3.0
BOX_GRID_WIDTH = 0.45
BOX_BORDER = 0.5
ROUGH_NOISE_STEP = 0.02
ROUGH_CELL_WIDTH = 0.1
ROUGH_BORDER = 0.25
SLOPE_BORDER = 0.25
SLOPE_RISE_LENGTH = 4.0
SLOPE_PLATFORM = 2.0

N_STAIR_STEPS = 6  # steps before the central platform


@dataclass(frozen=True)
class Terrain:
    """One generated track instance."""

    kind: str
    level: int
    difficulty: float
    heights: np.ndarray  # (GRID_N,) sampled heights
    linear_interp: bool  # True for slopes (continuous profile)

    @property
    def track_length(self):
        return TRACK_LENGTH

    def height_at(self, x):
        """Height lookup mirroring the step kernel (scalar or array x)."""
        x = np.asarray(x, dtype=np.float64)
        pos = (x - GRID_X0) / GRID_DX
        if self.linear_interp:
            i = np.clip(np.floor(pos).astype(int), 0, GRID_N - 2)
            w = np.clip(pos - i, 0.0, 1.0)
            return self.heights[i] * (1.0 - w) + self.heights[i + 1] * w
        i = np.clip(np.floor(pos).astype(int), 0, GRID_N - 1)
        return self.heights[i]

    def to_csv(self, path):
        xs = GRID_X0 + GRID_DX * np.arange(GRID_N)
        with open(path, "w") as f:
            f.write("x,height\n")
            for x, h in zip(xs, self.heights):
                f.write(f"{x:.17g},{h:.17g}\n")


def difficulty_param(kind, level):
    """min + (level/9) * (max - min); rough amplitudes snap to the noise step."""
    if kind not in DIFFICULTY_RANGES:
        raise ValueError(f"unknown terrain kind {kind!r}")
    if not 0 <= level <= 9:
        raise ValueError(f"terrain level {level} outside [0, 9]")
    lo, hi = DIFFICULTY_RANGES[kind]
    p = lo + (level / 9.0) * (hi - lo)
    if kind == "random_rough":
        p = round(p / ROUGH_NOISE_STEP) * ROUGH_NOISE_STEP
    return p


def _stair_profile(t, step_h, sign):
    """Height at distance t past the border for (inverted) pyramid stairs."""
    rise = N_STAIR_STEPS * STAIR_STEP_WIDTH
    if t < 0.0:
        h = 0.0
    elif t < rise:
        h = step_h * (int(t / STAIR_STEP_WIDTH) + 1)
    elif t < rise + STAIR_PLATFORM:
        h = step_h * N_STAIR_STEPS
    else:
        down = int((t - rise - STAIR_PLATFORM) / STAIR_STEP_WIDTH) + 1
        h = step_h * max(0, N_STAIR_STEPS - down)
    return sign * h


def _slope_profile(t, grade, sign):
    if t < 0.0:
        h = 0.0
    elif t < SLOPE_RISE_LENGTH:
        h = grade * t
    elif t < SLOPE_RISE_LENGTH + SLOPE_PLATFORM:
        h = grade * SLOPE_RISE_LENGTH
    else:
        h = max(0.0, grade * SLOPE_RISE_LENGTH - grade * (t - SLOPE_RISE_LENGTH - SLOPE_PLATFORM))
    return sign * h


def generate_terrain(kind, level, seed):
    """Deterministic heightfield for (kind, level, seed)."""
    p = difficulty_param(kind, level)
    rng = np.random.default_rng([int(seed) & 0x7FFFFFFF, KINDS.index(kind), level])
    xs = GRID_X0 + GRID_DX * np.arange(GRID_N)
    heights = np.zeros(GRID_N)

    if kind in ("pyramid_stairs", "inverted_pyramid_stairs"):
        sign = 1.0 if kind == "pyramid_stairs" else -1.0
        for g, x in enumerate(xs):
            heights[g] = _stair_profile(x - STAIR_BORDER, p, sign)
        linear = False
    elif kind == "boxes":
        n_cells = int(np.ceil((xs[-1] - BOX_BORDER) / BOX_GRID_WIDTH)) + 1
        cell_h = rng.uniform(0.0, p, n_cells)
        for g, x in enumerate(xs):
            t = x - BOX_BORDER
            heights[g] = 0.0 if t < 0.0 else cell_h[int(t / BOX_GRID_WIDTH)]
        linear = False
    elif kind == "random_rough":
        k = int(round(p / ROUGH_NOISE_STEP))
        n_cells = int(np.ceil((xs[-1] - ROUGH_BORDER) / ROUGH_CELL_WIDTH)) + 1
        cell_h = rng.integers(-k, k + 1, n_cells) * ROUGH_NOISE_STEP
        for g, x in enumerate(xs):
            t = x - ROUGH_BORDER
            heights[g] = 0.0 if t < 0.0 else cell_h[int(t / ROUGH_CELL_WIDTH)]
        linear = False
    elif kind in ("pyramid_slope", "inverted_pyramid_slope"):
        sign = 1.0 if kind == "pyramid_slope" else -1.0
        for g, x in enumerate(xs):
            heights[g] = _slope_profile(x - SLOPE_BORDER, p, sign)
        linear = True
    else:
        raise ValueError(f"unknown terrain kind {kind!r}")

    return Terrain(kind, int(level), p, heights, linear)
