"""Checkpoint container: named parameter groups in an .npz archive.

Layout (stable across versions, documented in the README):
  meta            -- JSON string: dims, hidden sizes, recovery kind, schedule
  <group>         -- float64 parameter vector per submodule, names:
                     obs_encoder, latent_policy, policy_log_std,
                     action_decoder, obs_recovery, act_recovery, value_head
Baseline policies use the same container with groups policy_net, value_net,
log_std and their own meta.
"""

import json

import numpy as np

from .model import L3PModel, model_from_meta


def save_model(model: L3PModel, path):
    arrays = {name: model.params[name] for name in model.params}
    np.savez(path, meta=np.bytes_(json.dumps(model.meta()).encode()), **arrays)


def load_model(path) -> L3PModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        model = model_from_meta(meta)
        for name in model.params:
            stored = data[name]
            if stored.shape != model.params[name].shape:
                raise ValueError(f"checkpoint group {name!r} has shape {stored.shape}, "
                                 f"model wants {model.params[name].shape}")
            model.params[name][...] = stored
    return model


def load_backbone(path, new_dims, seed) -> L3PModel:
    """Rebuild a model around the stored backbone with fresh adapters.

    Latent dims must match the checkpoint's; obs/act dims come from
    ``new_dims``.  The returned model has the backbone frozen.
    """
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        if (new_dims.latent_obs_dim != meta["dims"]["latent_obs_dim"]
                or new_dims.latent_act_dim != meta["dims"]["latent_act_dim"]):
            raise ValueError(
                f"checkpoint latent dims {meta['dims']['latent_obs_dim']}/"
                f"{meta['dims']['latent_act_dim']} do not match requested "
                f"{new_dims.latent_obs_dim}/{new_dims.latent_act_dim}")
        meta["dims"]["obs_dim"] = new_dims.obs_dim
        meta["dims"]["act_dim"] = new_dims.act_dim
        meta["frozen_backbone"] = True
        model = model_from_meta(meta)
        model.reinit_adapters(new_dims, seed)
        for name in ("latent_policy", "policy_log_std", "value_head"):
            model.params[name][...] = data[name]
    return model


def save_arrays(path, meta: dict, arrays: dict):
    np.savez(path, meta=np.bytes_(json.dumps(meta).encode()), **arrays)


def load_arrays(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}
    return meta, arrays
