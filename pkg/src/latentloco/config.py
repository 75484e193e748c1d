"""Run configuration: a flat sectioned key-value file, strictly validated.

Sections and keys are documented in the README.  Unknown keys are hard errors
(with a nearest-key hint), every field is typed, and serialize(parse(x))
round-trips.  Custom morphologies may be declared inline via
``[morphology:NAME]`` sections.
"""

import configparser
import difflib
import io
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .envs import KINDS
from .envs.morphology import REGISTRY, Morphology, get_morphology
from .model import L3PDims, L3PModel, ModelHidden
from .nets import mlp_spec, solve_hidden_sizes
from .trainer import PpoConfig

METHODS = ("mlp", "l3p", "mlp-transfer", "l3p-transfer")
PARITY_TOLERANCE = 0.05


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    method: str = "l3p"
    morphologies: tuple = ("quad-2",)
    prototype: str = "quad-2"
    terrain_kinds: tuple = KINDS
    level_cap: int = 9
    seeds: tuple = (0,)
    out_dir: str = "runs"
    deterministic: bool = True
    success_threshold: float = 0.8
    # model
    latent_obs_dim: int = 64
    latent_act_dim: int = 16
    obs_recovery_kind: str = "diffusion"
    diffusion_T: int = 10
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # training
    ppo: PpoConfig = PpoConfig()
    # transfer
    pretrain_checkpoint: str = ""
    fine_tune_kinds: tuple = ("random_rough",)
    fine_tune_level_cap: int = 2
    # matrix / ablation
    methods: tuple = METHODS
    ablate_dims_obs: tuple = (8, 16, 64, 256)
    ablate_dims_act: tuple = (2, 16, 128)
    # inline morphology definitions, name -> field dict
    custom_morphologies: dict = field(default_factory=dict)

    def morphology(self, name):
        if name in self.custom_morphologies:
            return Morphology(**self.custom_morphologies[name])
        return get_morphology(name)


_RUN_KEYS = {
    "name": str, "method": str, "morphologies": "strs", "prototype": str,
    "terrain_kinds": "strs", "level_cap": int, "seeds": "ints",
    "out_dir": str, "deterministic": bool, "success_threshold": float,
}
_MODEL_KEYS = {
    "latent_obs_dim": int, "latent_act_dim": int, "obs_recovery_kind": str,
    "diffusion_t": int, "beta_start": float, "beta_end": float,
}
_PPO_KEYS = {
    "gamma": float, "gae_lambda": float, "clip_ratio": float, "epochs": int,
    "minibatch_size": int, "rollout_length": int, "n_envs": int,
    "vf_coef": float, "ent_coef": float, "lambda_rec": float,
    "learning_rate": float, "max_grad_norm": float, "iterations": int,
}
_TRANSFER_KEYS = {
    "pretrain_checkpoint": str, "fine_tune_kinds": "strs",
    "fine_tune_level_cap": int,
}
_MATRIX_KEYS = {"methods": "strs"}
_ABLATION_KEYS = {"dims_obs": "ints", "dims_act": "ints"}
_MORPH_KEYS = {
    "n_legs": int, "joints_per_leg": int, "limb_lengths": "floats",
    "limb_masses": "floats", "body_length": float, "body_mass": float,
    "kp": float, "kd": float, "tau_max": float, "action_scale": float,
}

_SECTIONS = {
    "run": _RUN_KEYS,
    "model": _MODEL_KEYS,
    "ppo": _PPO_KEYS,
    "transfer": _TRANSFER_KEYS,
    "matrix": _MATRIX_KEYS,
    "ablation": _ABLATION_KEYS,
}


def _convert(raw, kind, where):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == "ints":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind == "strs":
            return tuple(v for v in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from None
    raise AssertionError(kind)


def _check_keys(section, keys, schema, path):
    for key in keys:
        if key not in schema:
            hint = difflib.get_close_matches(key, schema, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(
                f"{path}: unknown key {key!r} in section [{section}]{suffix}")


def parse_config(path) -> RunConfig:
    """Parse and fully validate a config file; unknown keys are errors."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except (configparser.Error, UnicodeDecodeError) as e:
        line = getattr(e, "lineno", "?")
        raise ConfigError(f"{path}:{line}: {e}") from None

    values = {}
    custom = {}
    for section in parser.sections():
        if section.startswith("morphology:"):
            name = section.split(":", 1)[1].strip()
            keys = dict(parser.items(section))
            _check_keys(section, keys, _MORPH_KEYS, path)
            morph = {"name": name}
            for k, raw in keys.items():
                morph[k] = _convert(raw, _MORPH_KEYS[k], f"{path} [{section}] {k}")
            custom[name] = morph
            continue
        if section not in _SECTIONS:
            known = ", ".join(_SECTIONS)
            raise ConfigError(f"{path}: unknown section [{section}]; known: {known}")
        schema = _SECTIONS[section]
        keys = dict(parser.items(section))
        _check_keys(section, keys, schema, path)
        for k, raw in keys.items():
            values[(section, k)] = _convert(raw, schema[k], f"{path} [{section}] {k}")

    ppo_kwargs = {k: v for (sec, k), v in values.items() if sec == "ppo"}
    try:
        ppo = PpoConfig(**ppo_kwargs)
    except ValueError as e:
        raise ConfigError(f"{path}: [ppo] {e}") from None

    def get(section, key, default):
        return values.get((section, key), default)

    cfg = RunConfig(
        name=get("run", "name", "run"),
        method=get("run", "method", "l3p"),
        morphologies=get("run", "morphologies", ("quad-2",)),
        prototype=get("run", "prototype", "quad-2"),
        terrain_kinds=get("run", "terrain_kinds", KINDS),
        level_cap=get("run", "level_cap", 9),
        seeds=get("run", "seeds", (0,)),
        out_dir=get("run", "out_dir", "runs"),
        deterministic=get("run", "deterministic", True),
        success_threshold=get("run", "success_threshold", 0.8),
        latent_obs_dim=get("model", "latent_obs_dim", 64),
        latent_act_dim=get("model", "latent_act_dim", 16),
        obs_recovery_kind=get("model", "obs_recovery_kind", "diffusion"),
        diffusion_T=get("model", "diffusion_t", 10),
        beta_start=get("model", "beta_start", 1e-4),
        beta_end=get("model", "beta_end", 0.02),
        ppo=ppo,
        pretrain_checkpoint=get("transfer", "pretrain_checkpoint", ""),
        fine_tune_kinds=get("transfer", "fine_tune_kinds", ("random_rough",)),
        fine_tune_level_cap=get("transfer", "fine_tune_level_cap", 2),
        methods=get("matrix", "methods", METHODS),
        ablate_dims_obs=get("ablation", "dims_obs", (8, 16, 64, 256)),
        ablate_dims_act=get("ablation", "dims_act", (2, 16, 128)),
        custom_morphologies=custom,
    )
    validate_config(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Write a RunConfig back to the sectioned key-value text form."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (tuple, list)):
            return ", ".join(str(x) for x in v)
        return str(v)

    out = io.StringIO()
    out.write("[run]\n")
    for k in _RUN_KEYS:
        out.write(f"{k} = {fmt(getattr(cfg, k))}\n")
    out.write("\n[model]\n")
    out.write(f"latent_obs_dim = {cfg.latent_obs_dim}\n")
    out.write(f"latent_act_dim = {cfg.latent_act_dim}\n")
    out.write(f"obs_recovery_kind = {cfg.obs_recovery_kind}\n")
    out.write(f"diffusion_t = {cfg.diffusion_T}\n")
    out.write(f"beta_start = {cfg.beta_start}\n")
    out.write(f"beta_end = {cfg.beta_end}\n")
    out.write("\n[ppo]\n")
    for k in _PPO_KEYS:
        out.write(f"{k} = {fmt(getattr(cfg.ppo, k))}\n")
    out.write("\n[transfer]\n")
    for k in _TRANSFER_KEYS:
        out.write(f"{k} = {fmt(getattr(cfg, k))}\n")
    out.write("\n[matrix]\nmethods = " + fmt(cfg.methods) + "\n")
    out.write("\n[ablation]\n")
    out.write(f"dims_obs = {fmt(cfg.ablate_dims_obs)}\n")
    out.write(f"dims_act = {fmt(cfg.ablate_dims_act)}\n")
    for name, m in cfg.custom_morphologies.items():
        out.write(f"\n[morphology:{name}]\n")
        for k in _MORPH_KEYS:
            if k in m:
                out.write(f"{k} = {fmt(m[k])}\n")
    return out.getvalue()


def l3p_param_count(cfg: RunConfig, morph) -> int:
    dims = L3PDims(morph.obs_dim, morph.act_dim, cfg.latent_obs_dim,
                   cfg.latent_act_dim)
    model = L3PModel(dims, seed=0, obs_recovery_kind=cfg.obs_recovery_kind,
                     diffusion_T=cfg.diffusion_T, beta_start=cfg.beta_start,
                     beta_end=cfg.beta_end)
    return model.param_count()


def mlp_hidden_for_parity(cfg: RunConfig, morph):
    """Baseline hidden sizes matched to the composed model's parameter count.

    The budget splits across twin actor/critic nets plus the log-std vector.
    """
    target = l3p_param_count(cfg, morph)
    best = None
    for w1 in range(8, 1024, 2):
        w2 = max(2, w1 // 2)
        n = (mlp_spec([morph.obs_dim, w1, w2, morph.act_dim]).param_count()
             + mlp_spec([morph.obs_dim, w1, w2, 1]).param_count()
             + morph.act_dim)
        err = abs(n - target)
        if best is None or err < best[0]:
            best = (err, (w1, w2), n)
    _, hidden, count = best
    rel = abs(count - target) / target
    if rel >= PARITY_TOLERANCE:
        raise ConfigError(
            f"cannot match baseline parameter count to {target} within "
            f"{PARITY_TOLERANCE:.0%} (best {count}, off by {rel:.1%})")
    return hidden


def validate_config(cfg: RunConfig):
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; known: {METHODS}")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown matrix method {m!r}; known: {METHODS}")
    if not cfg.seeds:
        raise ConfigError("seeds must be non-empty")
    if not cfg.morphologies:
        raise ConfigError("morphologies must be non-empty")
    for kind_list in (cfg.terrain_kinds, cfg.fine_tune_kinds):
        for kind in kind_list:
            if kind not in KINDS:
                raise ConfigError(f"unknown terrain kind {kind!r}; known: {KINDS}")
    if not 0 <= cfg.level_cap <= 9 or not 0 <= cfg.fine_tune_level_cap <= 9:
        raise ConfigError("level caps must lie in [0, 9]")
    if not 0.0 < cfg.success_threshold <= 1.0:
        raise ConfigError("success_threshold must lie in (0, 1]")
    if cfg.obs_recovery_kind not in ("diffusion", "mlp"):
        raise ConfigError(f"unknown obs_recovery_kind {cfg.obs_recovery_kind!r}")
    if cfg.latent_obs_dim < 1 or cfg.latent_act_dim < 1:
        raise ConfigError("latent dims must be positive")
    if cfg.diffusion_T < 1 or not 0 <= cfg.beta_start <= cfg.beta_end < 1:
        raise ConfigError("invalid diffusion schedule parameters")
    names = set(cfg.morphologies) | {cfg.prototype}
    for name in names:
        if name not in REGISTRY and name not in cfg.custom_morphologies:
            raise ConfigError(f"unknown morphology {name!r}; known: "
                              f"{sorted(REGISTRY)} or a [morphology:...] section")
        try:
            cfg.morphology(name)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"morphology {name!r}: {e}") from None
    # parameter parity is a hard precondition for the baseline comparisons
    if cfg.method in ("mlp", "mlp-transfer") or any(
            m in ("mlp", "mlp-transfer") for m in cfg.methods):
        for name in cfg.morphologies:
            mlp_hidden_for_parity(cfg, cfg.morphology(name))


def out_root(cfg: RunConfig):
    """Output root, overridable only via LATENTLOCO_OUT_ROOT."""
    return os.environ.get("LATENTLOCO_OUT_ROOT", cfg.out_dir)
