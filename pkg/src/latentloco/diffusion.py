"""Denoising-diffusion recovery: noise schedule, forward corruption, learned
reverse chain, and the epsilon-prediction training loss.

The denoiser is a conditioned MLP over [noisy target || sinusoidal time
embedding || condition]; at this scale flat vectors replace an image U-Net.
The reverse chain starts from a standard-normal draw and runs T steps with
fixed per-step variance beta_t.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nets

TIME_EMBED_DIM = 8


@dataclass(frozen=True)
class BetaSchedule:
    """Linear beta schedule with the derived alpha and alpha-bar products."""

    T: int
    betas: np.ndarray      # beta_t, t = 1..T (index t-1)
    alphas: np.ndarray     # 1 - beta_t
    alpha_bars: np.ndarray # prod_{s<=t} alpha_s; alpha_bar_0 == 1 by convention

    def beta(self, t):
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha(self, t):
        self._check_t(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t):
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def _check_t(self, t):
        if not 1 <= t <= self.T:
            raise ValueError(f"diffusion step t={t} outside [1, {self.T}]")


def make_schedule(T, beta_start=1e-4, beta_end=0.02):
    """Linearly interpolated betas over T steps, with derived alpha products."""
    if T < 1:
        raise ValueError(f"schedule needs T >= 1, got {T}")
    if not (0.0 <= beta_start <= beta_end < 1.0):
        raise ValueError(f"beta bounds violated: start={beta_start}, end={beta_end}")
    if T == 1:
        betas = np.array([beta_start])
    else:
        betas = np.linspace(beta_start, beta_end, T)
    alphas = 1.0 - betas
    return BetaSchedule(T, betas, alphas, np.cumprod(alphas))


def time_embedding(t, dim=TIME_EMBED_DIM):
    """Sinusoidal embedding of an integer step (or array of steps)."""
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-math.log(1000.0) * np.arange(half) / half)
    angles = t[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


@dataclass
class Denoiser:
    """Conditioned epsilon-predictor: [z_t || temb(t) || cond] -> eps_hat."""

    target_dim: int
    cond_dim: int
    spec: nets.MlpSpec = None
    params: np.ndarray = None

    @classmethod
    def create(cls, target_dim, cond_dim, hidden=(64,), seed=0):
        spec = nets.mlp_spec(
            [target_dim + TIME_EMBED_DIM + cond_dim, *hidden, target_dim]
        )
        return cls(target_dim, cond_dim, spec, nets.init_params(spec, seed))

    def predict(self, z_t, t, cond):
        """Numpy eps prediction; ``z_t``/``cond`` are (d,) or (B, d)."""
        z_t = np.atleast_2d(np.asarray(z_t, dtype=np.float64))
        temb = np.broadcast_to(time_embedding(t), (z_t.shape[0], TIME_EMBED_DIM))
        if self.cond_dim:
            cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
            x = np.concatenate([z_t, temb, cond], axis=1)
        else:
            x = np.concatenate([z_t, temb], axis=1)
        out = nets.mlp_forward(self.spec, self.params, x)
        return out[0] if np.asarray(t).ndim == 0 and out.shape[0] == 1 else out


def q_sample(z0, t, eps, sched):
    """Forward corruption in closed form: sqrt(ab_t) z0 + sqrt(1-ab_t) eps."""
    sched._check_t(t)
    ab = sched.alpha_bar(t)
    z0 = np.asarray(z0, dtype=np.float64)
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * np.asarray(eps)


def q_sample_stepwise(z0, t, rng, sched):
    """Apply the one-step corruption kernel t times (test oracle for q_sample)."""
    z = np.asarray(z0, dtype=np.float64).copy()
    for s in range(1, t + 1):
        b = sched.beta(s)
        z = math.sqrt(1.0 - b) * z + math.sqrt(b) * rng.standard_normal(z.shape)
    return z


def _eps_fn(denoiser):
    if callable(denoiser) and not isinstance(denoiser, Denoiser):
        return denoiser
    return denoiser.predict


def p_step(z_t, t, denoiser, cond, sched, noise):
    """One reverse step: posterior mean from predicted eps, variance beta_t.

    The noise term is suppressed at t=1 so the chain ends on the mean.
    ``denoiser`` may be a Denoiser or any callable (z_t, t, cond) -> eps.
    """
    sched._check_t(t)
    z_t = np.asarray(z_t, dtype=np.float64)
    eps_hat = np.asarray(_eps_fn(denoiser)(z_t, t, cond))
    b = sched.beta(t)
    ab = sched.alpha_bar(t)
    # b == 0 forces alpha_bar == 1 at t=1; the eps coefficient is 0 there.
    coef = 0.0 if b == 0.0 else b / math.sqrt(1.0 - ab)
    mean = (z_t - coef * eps_hat) / math.sqrt(sched.alpha(t))
    if t > 1:
        return mean + math.sqrt(b) * np.asarray(noise)
    return mean


def recover(cond, denoiser, sched, rng, dim=None):
    """Full reverse chain from a standard-normal draw, conditioned on ``cond``.

    Returns the reconstructed vector (the s' used by the observation
    reconstruction loss at evaluation time).  ``dim`` is required when
    ``denoiser`` is a bare callable rather than a Denoiser.
    """
    if dim is None:
        if not isinstance(denoiser, Denoiser):
            raise ValueError("recover: pass dim= when denoiser is a bare callable")
        dim = denoiser.target_dim
    z = rng.standard_normal(dim)
    for t in range(sched.T, 0, -1):
        noise = rng.standard_normal(dim) if t > 1 else 0.0
        z = p_step(z, t, denoiser, cond, sched, noise)
    return z


def estimate_z0(z_t, t, eps, sched):
    """Algebraic inversion of q_sample given the true noise (identity check)."""
    ab = sched.alpha_bar(t)
    return (np.asarray(z_t) - math.sqrt(1.0 - ab) * np.asarray(eps)) / math.sqrt(ab)


def diffusion_train_loss(denoiser, tensors, z0_batch, cond_batch, sched, rng,
                         t_eps=None):
    """Mean epsilon-prediction error at uniformly sampled steps (graph-valued).

    ``tensors`` are the denoiser's parameter Tensors; ``cond_batch`` may be a
    Tensor (gradients then flow into the conditioning producer, i.e. the
    encoder) or a constant array.  Loss = mean over the batch of
    ||eps - eps_hat||^2, so an untrained net scores about target_dim.
    ``t_eps=(t, eps)`` pins the sampled steps and noise (deterministic
    gradient checks, oracle injection).
    """
    z0 = np.atleast_2d(np.asarray(z0_batch, dtype=np.float64))
    if z0.shape[0] == 0:
        raise ValueError("diffusion_train_loss: empty batch")
    n = z0.shape[0]
    if t_eps is not None:
        t, eps = np.asarray(t_eps[0]), np.asarray(t_eps[1], dtype=np.float64)
    else:
        t = rng.integers(1, sched.T + 1, size=n)
        eps = rng.standard_normal(z0.shape)
    ab = sched.alpha_bars[t - 1][:, None]
    z_t = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps

    parts = [ad.Tensor(z_t), ad.Tensor(time_embedding(t))]
    if isinstance(cond_batch, ad.Tensor):
        parts.append(cond_batch)
    elif cond_batch is not None and np.asarray(cond_batch).size:
        parts.append(ad.Tensor(np.atleast_2d(np.asarray(cond_batch, dtype=np.float64))))
    x = ad.concat(parts, axis=1)
    eps_hat = nets.mlp_forward_graph(denoiser.spec, tensors, x)
    return ad.scale(ad.sq_err(eps_hat, ad.Tensor(eps)), 1.0 / n)
