"""MLP construction, initialization, and diagonal-Gaussian policy heads.

Every network in the system (encoder, backbone, decoder, recovery nets, value
head, baselines) is an ``MlpSpec`` plus a flat float64 parameter vector.  Two
forward paths exist: a plain-numpy one for rollouts and evaluation, and a
graph-building one for updates; both apply the same arithmetic in the same
order so their outputs agree bitwise.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected network shape: sizes plus activation choices."""

    layer_sizes: tuple
    activation: str = "elu"            # hidden activation: "elu" | "tanh"
    output_activation: str = "linear"  # "linear" | "tanh"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("MlpSpec needs at least input and output sizes")
        if any(int(n) <= 0 for n in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive: {self.layer_sizes}")
        if self.activation not in ("elu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_activation not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))

    @property
    def in_dim(self):
        return self.layer_sizes[0]

    @property
    def out_dim(self):
        return self.layer_sizes[-1]

    def param_count(self):
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


def mlp_spec(sizes, activation="elu", output_activation="linear"):
    return MlpSpec(tuple(sizes), activation, output_activation)


def init_params(spec, seed):
    """Scaled-uniform (Xavier) weight init, zero biases; deterministic in seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    sizes = spec.layer_sizes
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack_params(spec, flat):
    """Views of a flat vector as per-layer (W, b) pairs; no copies."""
    flat = np.asarray(flat)
    if flat.size != spec.param_count():
        raise ad.ShapeError(
            f"parameter vector has {flat.size} entries, spec wants {spec.param_count()}"
        )
    layers = []
    i = 0
    sizes = spec.layer_sizes
    for k in range(len(sizes) - 1):
        n_in, n_out = sizes[k], sizes[k + 1]
        w = flat[i:i + n_in * n_out].reshape(n_in, n_out)
        i += n_in * n_out
        b = flat[i:i + n_out]
        i += n_out
        layers.append((w, b))
    return layers


def _act_np(x, kind):
    if kind == "tanh":
        return np.tanh(x)
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def mlp_forward(spec, flat, x):
    """Numpy forward pass; ``x`` is (in_dim,) or (B, in_dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.in_dim:
        raise ad.ShapeError(f"input has dim {x.shape[-1]}, spec wants {spec.in_dim}")
    layers = unpack_params(spec, flat)
    h = x
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = _act_np(h, spec.activation)
        elif spec.output_activation == "tanh":
            h = np.tanh(h)
    return h


def mlp_tensors(spec, flat):
    """Per-layer parameter Tensors sharing storage with ``flat``.

    In-place writes to the flat vector (optimizer scatter) and the tensors'
    ``data`` views are the same memory.
    """
    return [
        t
        for w, b in unpack_params(spec, flat)
        for t in (ad.Tensor(w, requires_grad=True), ad.Tensor(b, requires_grad=True))
    ]


def mlp_forward_graph(spec, tensors, x):
    """Autodiff forward pass; ``tensors`` comes from :func:`mlp_tensors`."""
    h = x if isinstance(x, ad.Tensor) else ad.Tensor(np.atleast_2d(x))
    n_layers = len(spec.layer_sizes) - 1
    for i in range(n_layers):
        w, b = tensors[2 * i], tensors[2 * i + 1]
        h = ad.add(ad.matmul(h, w), b)
        if i < n_layers - 1:
            h = ad.tanh(h) if spec.activation == "tanh" else ad.elu(h)
        elif spec.output_activation == "tanh":
            h = ad.tanh(h)
    return h


# --- diagonal Gaussian policy head -----------------------------------------

@dataclass
class GaussianHead:
    """State-independent-log-std Gaussian over a latent or action vector."""

    mean: np.ndarray
    log_std: np.ndarray

    def sample(self, eps):
        return gaussian_sample(self.mean, self.log_std, eps)

    def log_prob(self, sample):
        return gaussian_log_prob(self.mean, self.log_std, sample)


def _clamped_std(log_std):
    return np.exp(np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX))


def gaussian_sample(mean, log_std, eps):
    """Reparameterized draw mean + std * eps (eps recorded by the caller)."""
    return mean + _clamped_std(log_std) * eps


def gaussian_log_prob(mean, log_std, sample):
    """Diagonal-Gaussian log density, summed over the last axis.

    Batched inputs (B, d) give a (B,) result; 1-D inputs give a scalar.
    Mirrors the graph version's arithmetic order exactly, so log-probs stored
    during rollouts match the update-time recomputation bitwise.
    """
    d = np.asarray(mean).shape[-1]
    ls = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = (np.asarray(sample) - mean) * np.exp(ls * -1.0)
    per_dim = (z * z) * -0.5 - ls
    return per_dim.sum(axis=-1) + (-_HALF_LOG_2PI * d)


def gaussian_log_prob_graph(mean_t, log_std_t, sample):
    """Graph version of :func:`gaussian_log_prob`; gradients flow to mean/log_std.

    ``mean_t`` is a (B, d) Tensor, ``log_std_t`` a (d,) Tensor, ``sample`` a
    constant (B, d) array.  Returns a (B,) Tensor.
    """
    ls = ad.clip(log_std_t, LOG_STD_MIN, LOG_STD_MAX)
    diff = ad.sub(ad.Tensor(sample), mean_t)
    z = ad.mul(diff, ad.exp(ad.neg(ls)))
    per_dim = ad.sub(ad.scale(ad.mul(z, z), -0.5), ls)
    return ad.add(ad.row_sum(per_dim), ad.Tensor(-_HALF_LOG_2PI * mean_t.shape[1]))


def gaussian_entropy(log_std):
    ls = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    return float(np.sum(ls + 0.5 * (1.0 + math.log(2.0 * math.pi))))


def gaussian_entropy_graph(log_std_t):
    ls = ad.clip(log_std_t, LOG_STD_MIN, LOG_STD_MAX)
    return ad.add(ad.tsum(ls),
                  ad.Tensor(0.5 * (1.0 + math.log(2.0 * math.pi)) * log_std_t.size))


def solve_hidden_sizes(target_count, in_dim, out_dim, base=(256, 128)):
    """Pick two hidden widths (base aspect ratio) matching a parameter budget.

    Used to size baseline MLPs to the composed model's learnable-parameter
    count; the caller validates the resulting parity.
    """
    best = None
    for w1 in range(4, 2048):
        w2 = max(2, int(round(w1 * base[1] / base[0])))
        n = (in_dim * w1 + w1) + (w1 * w2 + w2) + (w2 * out_dim + out_dim)
        err = abs(n - target_count)
        if best is None or err < best[0]:
            best = (err, (w1, w2))
    return best[1]
