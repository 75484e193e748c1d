"""The composed policy: observation encoder, latent policy backbone, action
decoder, recovery modules, and value head.

The backbone maps latent observations to a Gaussian over latent actions and is
the transferable core: `freeze_backbone` pins it (and the value head) bitwise
while `reinit_adapters` re-sizes encoder/decoder/recovery nets for a new
morphology.  Reconstruction pressure comes from two losses: an
epsilon-prediction surrogate for the conditioned observation-recovery
diffusion model, and an MSE between the latent action and the recovery net's
estimate of it from the decoded action.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import diffusion as df
from . import nets

BACKBONE_PARTS = ("latent_policy", "policy_log_std", "value_head")
ADAPTER_PARTS = ("obs_encoder", "action_decoder", "obs_recovery", "act_recovery")


@dataclass(frozen=True)
class L3PDims:
    obs_dim: int
    act_dim: int
    latent_obs_dim: int = 64
    latent_act_dim: int = 16

    def __post_init__(self):
        for name in ("obs_dim", "act_dim", "latent_obs_dim", "latent_act_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ModelHidden:
    """Hidden-layer widths for the submodules."""

    backbone: tuple = (256, 128)
    adapter: tuple = (64,)
    value: tuple = (64,)
    recovery: tuple = (64,)


class L3PModel:
    """Encoder / latent policy / decoder with recovery modules and critic."""

    def __init__(self, dims: L3PDims, seed=0, hidden: ModelHidden = ModelHidden(),
                 action_scale=0.5, obs_recovery_kind="diffusion",
                 diffusion_T=10, beta_start=1e-4, beta_end=0.02,
                 log_std_init=-0.5):
        if obs_recovery_kind not in ("diffusion", "mlp"):
            raise ValueError(f"unknown obs_recovery_kind {obs_recovery_kind!r}")
        self.dims = dims
        self.hidden = hidden
        self.action_scale = float(action_scale)
        self.obs_recovery_kind = obs_recovery_kind
        self.sched = df.make_schedule(diffusion_T, beta_start, beta_end)
        self.frozen_backbone = False
        self.log_std_init = float(log_std_init)

        rng = np.random.default_rng(seed)
        self.specs = {}
        self.params = {}
        self._build_backbone(rng)
        self._build_adapters(rng)
        self._rebuild_tensors()

    # -- construction ---------------------------------------------------------

    def _build_backbone(self, rng):
        d, h = self.dims, self.hidden
        self.specs["latent_policy"] = nets.mlp_spec(
            [d.latent_obs_dim, *h.backbone, d.latent_act_dim])
        self.specs["value_head"] = nets.mlp_spec([d.latent_obs_dim, *h.value, 1])
        self.params["latent_policy"] = nets.init_params(self.specs["latent_policy"], rng)
        self.params["value_head"] = nets.init_params(self.specs["value_head"], rng)
        self.params["policy_log_std"] = np.full(d.latent_act_dim, self.log_std_init)

    def _build_adapters(self, rng):
        d, h = self.dims, self.hidden
        self.specs["obs_encoder"] = nets.mlp_spec([d.obs_dim, *h.adapter, d.latent_obs_dim])
        self.specs["action_decoder"] = nets.mlp_spec(
            [d.latent_act_dim, *h.adapter, d.act_dim], output_activation="tanh")
        self.specs["act_recovery"] = nets.mlp_spec([d.act_dim, *h.recovery, d.latent_act_dim])
        self.params["obs_encoder"] = nets.init_params(self.specs["obs_encoder"], rng)
        self.params["action_decoder"] = nets.init_params(self.specs["action_decoder"], rng)
        self.params["act_recovery"] = nets.init_params(self.specs["act_recovery"], rng)
        if self.obs_recovery_kind == "diffusion":
            den = df.Denoiser.create(d.obs_dim, d.latent_obs_dim,
                                     hidden=h.recovery, seed=rng)
            self.specs["obs_recovery"] = den.spec
            self.params["obs_recovery"] = den.params
            self.obs_denoiser = den
        else:
            self.specs["obs_recovery"] = nets.mlp_spec(
                [d.latent_obs_dim, *h.recovery, d.obs_dim])
            self.params["obs_recovery"] = nets.init_params(self.specs["obs_recovery"], rng)
            self.obs_denoiser = None

    def _rebuild_tensors(self):
        self.tensors = {
            name: nets.mlp_tensors(self.specs[name], self.params[name])
            for name in self.specs
        }
        self.tensors["policy_log_std"] = [
            ad.Tensor(self.params["policy_log_std"], requires_grad=True)
        ]
        if self.obs_denoiser is not None:
            self.obs_denoiser.params = self.params["obs_recovery"]

    # -- numpy paths (rollouts, evaluation) ------------------------------------

    def encode(self, obs):
        return nets.mlp_forward(self.specs["obs_encoder"], self.params["obs_encoder"], obs)

    def policy_mean(self, h):
        return nets.mlp_forward(self.specs["latent_policy"], self.params["latent_policy"], h)

    def value(self, h):
        out = nets.mlp_forward(self.specs["value_head"], self.params["value_head"], h)
        return out[..., 0]

    def act(self, h, rng=None, deterministic=False):
        """Sample a latent action from the Gaussian head over the backbone.

        Returns (z, log_prob, value); batched h gives batched outputs.
        """
        mean = self.policy_mean(h)
        log_std = self.params["policy_log_std"]
        if deterministic or rng is None:
            z = mean.copy()
        else:
            eps = rng.standard_normal(mean.shape)
            z = nets.gaussian_sample(mean, log_std, eps)
        logp = nets.gaussian_log_prob(mean, log_std, z)
        return z, logp, self.value(h)

    def decode(self, z):
        out = nets.mlp_forward(self.specs["action_decoder"], self.params["action_decoder"], z)
        return out * self.action_scale

    def recover_obs(self, h, rng):
        """Full recovery of an observation from its latent (evaluation path)."""
        if self.obs_denoiser is not None:
            return df.recover(h, self.obs_denoiser, self.sched, rng)
        return nets.mlp_forward(self.specs["obs_recovery"], self.params["obs_recovery"], h)

    # -- graph paths (updates) --------------------------------------------------

    def encode_graph(self, obs_const):
        return nets.mlp_forward_graph(self.specs["obs_encoder"],
                                      self.tensors["obs_encoder"], obs_const)

    def policy_graph(self, h_t):
        return nets.mlp_forward_graph(self.specs["latent_policy"],
                                      self.tensors["latent_policy"], h_t)

    def value_graph(self, h_t):
        return nets.mlp_forward_graph(self.specs["value_head"],
                                      self.tensors["value_head"], h_t)

    def decode_graph(self, z):
        out = nets.mlp_forward_graph(self.specs["action_decoder"],
                                     self.tensors["action_decoder"], z)
        return ad.scale(out, self.action_scale)

    def log_std_tensor(self):
        return self.tensors["policy_log_std"][0]

    def recon_losses_graph(self, obs_const, h_t, z_const, rng):
        """(L_s, L_a) as graph scalars, batch-mean.

        L_s: single-step epsilon-prediction surrogate of the conditioned
        recovery chain (full-chain recovery is evaluation-only).
        L_a: ||z - act_recovery(decode(z))||^2 with the decode in-graph, so the
        decoder is pulled toward invertibility together with the recovery net.
        """
        n = obs_const.shape[0]
        if self.obs_recovery_kind == "diffusion":
            l_s = df.diffusion_train_loss(self.obs_denoiser, self.tensors["obs_recovery"],
                                          obs_const, h_t, self.sched, rng)
        else:
            s_hat = nets.mlp_forward_graph(self.specs["obs_recovery"],
                                           self.tensors["obs_recovery"], h_t)
            l_s = ad.scale(ad.sq_err(s_hat, ad.Tensor(obs_const)), 1.0 / n)
        a_t = self.decode_graph(ad.Tensor(z_const))
        z_hat = nets.mlp_forward_graph(self.specs["act_recovery"],
                                       self.tensors["act_recovery"], a_t)
        l_a = ad.scale(ad.sq_err(z_hat, ad.Tensor(z_const)), 1.0 / n)
        return l_s, l_a

    # -- losses (numpy evaluation helpers) --------------------------------------

    def recon_losses(self, obs, h, z, rng):
        """Numpy (L_s, L_a) on a batch, for logging/evaluation."""
        l_s, l_a = self.recon_losses_graph(np.atleast_2d(obs),
                                           ad.Tensor(np.atleast_2d(h)),
                                           np.atleast_2d(z), rng)
        return l_s.item(), l_a.item()

    @staticmethod
    def total_loss(l_policy, l_s, l_a, lambda_rec):
        """Joint objective: policy loss plus weighted reconstruction terms."""
        if lambda_rec < 0:
            raise ValueError("lambda_rec must be >= 0")
        if isinstance(l_policy, ad.Tensor):
            rec = ad.scale(ad.add(l_s, l_a), lambda_rec)
            return ad.add(l_policy, rec)
        return l_policy + lambda_rec * (l_s + l_a)

    # -- freezing & transfer -----------------------------------------------------

    def freeze_backbone(self):
        self.frozen_backbone = True
        return self

    def unfreeze_backbone(self):
        self.frozen_backbone = False
        return self

    def trainable_parts(self):
        parts = list(ADAPTER_PARTS)
        if not self.frozen_backbone:
            parts = list(BACKBONE_PARTS) + parts
        return parts

    def trainable_tensors(self):
        out = []
        for part in self.trainable_parts():
            out.extend(self.tensors[part])
        return out

    def reinit_adapters(self, new_dims: L3PDims, seed):
        """Fresh encoder/decoder/recovery nets for a new morphology.

        The backbone defines the latent space, so latent dims must match.
        """
        if (new_dims.latent_obs_dim != self.dims.latent_obs_dim
                or new_dims.latent_act_dim != self.dims.latent_act_dim):
            raise ValueError(
                f"latent dims {new_dims.latent_obs_dim}/{new_dims.latent_act_dim} do not "
                f"match the backbone's {self.dims.latent_obs_dim}/{self.dims.latent_act_dim}")
        self.dims = new_dims
        self._build_adapters(np.random.default_rng(seed))
        self._rebuild_tensors()
        return self

    # -- bookkeeping ---------------------------------------------------------------

    def param_count(self, parts=None):
        parts = parts or list(self.params)
        return int(sum(self.params[p].size for p in parts))

    def backbone_hash(self):
        """SHA-256 over the backbone parameter bytes (freeze verification)."""
        digest = hashlib.sha256()
        for part in BACKBONE_PARTS:
            digest.update(self.params[part].tobytes())
        return digest.hexdigest()

    def meta(self):
        return {
            "dims": {"obs_dim": self.dims.obs_dim, "act_dim": self.dims.act_dim,
                     "latent_obs_dim": self.dims.latent_obs_dim,
                     "latent_act_dim": self.dims.latent_act_dim},
            "hidden": {"backbone": list(self.hidden.backbone),
                       "adapter": list(self.hidden.adapter),
                       "value": list(self.hidden.value),
                       "recovery": list(self.hidden.recovery)},
            "action_scale": self.action_scale,
            "obs_recovery_kind": self.obs_recovery_kind,
            "diffusion_T": self.sched.T,
            "beta_start": float(self.sched.betas[0]),
            "beta_end": float(self.sched.betas[-1]),
            "frozen_backbone": self.frozen_backbone,
        }


def model_from_meta(meta):
    dims = L3PDims(**meta["dims"])
    hidden = ModelHidden(tuple(meta["hidden"]["backbone"]), tuple(meta["hidden"]["adapter"]),
                         tuple(meta["hidden"]["value"]), tuple(meta["hidden"]["recovery"]))
    m = L3PModel(dims, seed=0, hidden=hidden, action_scale=meta["action_scale"],
                 obs_recovery_kind=meta["obs_recovery_kind"],
                 diffusion_T=meta["diffusion_T"], beta_start=meta["beta_start"],
                 beta_end=meta["beta_end"])
    if meta.get("frozen_backbone"):
        m.freeze_backbone()
    return m
