"""PPO with GAE over the composed model or MLP baselines, plus the staged
transfer protocol: pretrain on the prototype, entity transfer with a frozen
backbone, and restricted-terrain fine-tuning with zero-shot evaluation.

All randomness flows from two generator streams per run (policy/update and
envs), so single-threaded runs are bit-reproducible from (config, seed).
"""

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import curriculum as curr
from . import nets
from .envs import EnvBatch, EnvConfig, KINDS, get_morphology
from .model import L3PDims, L3PModel, ModelHidden


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 5
    minibatch_size: int = 256
    rollout_length: int = 64
    n_envs: int = 64
    vf_coef: float = 0.5
    ent_coef: float = 0.005
    lambda_rec: float = 1.0
    learning_rate: float = 3e-4
    max_grad_norm: float = 1.0
    iterations: int = 300

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        for name in ("clip_ratio", "vf_coef", "ent_coef", "lambda_rec",
                     "learning_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class RolloutBuffer:
    """(T, n_envs, ...) arrays for one collection phase."""

    obs: np.ndarray
    lat_actions: np.ndarray   # the Gaussian variable (latent action / raw action)
    actions: np.ndarray       # decoded, executed actions
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray = None
    advantages: np.ndarray = None
    returns: np.ndarray = None
    episode_infos: list = None


def compute_gae(rewards, values, dones, last_value, gamma, gae_lambda):
    """Standard GAE recursion; accepts (T,) or (T, n) arrays.

    delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
    A_t = delta_t + gamma lambda (1 - done_t) A_{t+1};  returns = A + V.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    squeeze = rewards.ndim == 1
    if squeeze:
        rewards = rewards[:, None]
        values = np.asarray(values, dtype=np.float64)[:, None]
        dones = np.asarray(dones)[:, None]
        last_value = np.atleast_1d(np.asarray(last_value, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    not_done = 1.0 - np.asarray(dones, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    gae = np.zeros(rewards.shape[1])
    next_value = np.asarray(last_value, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        gae = delta + gamma * gae_lambda * not_done[t] * gae
        adv[t] = gae
        next_value = values[t]
    ret = adv + values
    if squeeze:
        return adv[:, 0], ret[:, 0]
    return adv, ret


# --- policies ----------------------------------------------------------------

class L3PPolicy:
    """PPO adapter for the composed model (Gaussian over latent actions)."""

    def __init__(self, model: L3PModel):
        self.model = model

    @property
    def lat_dim(self):
        return self.model.dims.latent_act_dim

    def act_batch(self, obs, rng, deterministic=False):
        m = self.model
        h = m.encode(obs)
        z, logp, value = m.act(h, rng, deterministic=deterministic)
        return m.decode(z), z, logp, value

    def value_batch(self, obs):
        return self.model.value(self.model.encode(obs))

    def trainable_tensors(self):
        return self.model.trainable_tensors()

    def loss_graph(self, mb, cfg: PpoConfig, rng):
        m = self.model
        h_t = m.encode_graph(ad.Tensor(mb["obs"]))
        mean_t = m.policy_graph(h_t)
        logp_t = nets.gaussian_log_prob_graph(mean_t, m.log_std_tensor(), mb["lat_actions"])
        stats = {}
        policy_loss, value_loss, entropy = _ppo_core(
            logp_t, m.value_graph(h_t), m.log_std_tensor(), mb, cfg, stats)
        total = ad.add(policy_loss,
                       ad.sub(ad.scale(value_loss, cfg.vf_coef),
                              ad.scale(entropy, cfg.ent_coef)))
        if cfg.lambda_rec > 0.0:
            l_s, l_a = m.recon_losses_graph(mb["obs"], h_t, mb["lat_actions"], rng)
            total = ad.add(total, ad.scale(ad.add(l_s, l_a), cfg.lambda_rec))
            stats["L_s"] = l_s.item()
            stats["L_a"] = l_a.item()
        else:
            stats["L_s"] = 0.0
            stats["L_a"] = 0.0
        return total, stats

    def save(self, path):
        ckpt.save_model(self.model, path)


class MLPPolicy:
    """End-to-end baseline: Gaussian over a raw pre-squash action vector."""

    def __init__(self, obs_dim, act_dim, hidden, action_scale, seed,
                 log_std_init=-0.5):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.hidden = tuple(hidden)
        self.action_scale = float(action_scale)
        rng = np.random.default_rng(seed)
        self.policy_spec = nets.mlp_spec([obs_dim, *self.hidden, act_dim])
        self.value_spec = nets.mlp_spec([obs_dim, *self.hidden, 1])
        self.params = {
            "policy_net": nets.init_params(self.policy_spec, rng),
            "value_net": nets.init_params(self.value_spec, rng),
            "log_std": np.full(act_dim, float(log_std_init)),
        }
        self._rebuild_tensors()

    def _rebuild_tensors(self):
        self.tensors = {
            "policy_net": nets.mlp_tensors(self.policy_spec, self.params["policy_net"]),
            "value_net": nets.mlp_tensors(self.value_spec, self.params["value_net"]),
            "log_std": [ad.Tensor(self.params["log_std"], requires_grad=True)],
        }

    @property
    def lat_dim(self):
        return self.act_dim

    def param_count(self):
        return int(sum(p.size for p in self.params.values()))

    def act_batch(self, obs, rng, deterministic=False):
        mean = nets.mlp_forward(self.policy_spec, self.params["policy_net"], obs)
        if deterministic or rng is None:
            u = mean.copy()
        else:
            u = nets.gaussian_sample(mean, self.params["log_std"],
                                     rng.standard_normal(mean.shape))
        logp = nets.gaussian_log_prob(mean, self.params["log_std"], u)
        value = nets.mlp_forward(self.value_spec, self.params["value_net"], obs)[..., 0]
        return np.tanh(u) * self.action_scale, u, logp, value

    def value_batch(self, obs):
        return nets.mlp_forward(self.value_spec, self.params["value_net"], obs)[..., 0]

    def trainable_tensors(self):
        return (self.tensors["policy_net"] + self.tensors["value_net"]
                + self.tensors["log_std"])

    def loss_graph(self, mb, cfg: PpoConfig, rng):
        mean_t = nets.mlp_forward_graph(self.policy_spec, self.tensors["policy_net"],
                                        ad.Tensor(mb["obs"]))
        log_std_t = self.tensors["log_std"][0]
        logp_t = nets.gaussian_log_prob_graph(mean_t, log_std_t, mb["lat_actions"])
        value_t = nets.mlp_forward_graph(self.value_spec, self.tensors["value_net"],
                                         ad.Tensor(mb["obs"]))
        stats = {}
        policy_loss, value_loss, entropy = _ppo_core(
            logp_t, value_t, log_std_t, mb, cfg, stats)
        total = ad.add(policy_loss,
                       ad.sub(ad.scale(value_loss, cfg.vf_coef),
                              ad.scale(entropy, cfg.ent_coef)))
        stats["L_s"] = 0.0
        stats["L_a"] = 0.0
        return total, stats

    def save(self, path):
        meta = {"kind": "mlp", "obs_dim": self.obs_dim, "act_dim": self.act_dim,
                "hidden": list(self.hidden), "action_scale": self.action_scale}
        ckpt.save_arrays(path, meta, self.params)

    @classmethod
    def load(cls, path):
        meta, arrays = ckpt.load_arrays(path)
        pol = cls(meta["obs_dim"], meta["act_dim"], meta["hidden"],
                  meta["action_scale"], seed=0)
        for k in pol.params:
            pol.params[k][...] = arrays[k]
        return pol

    @classmethod
    def from_pretrained(cls, path, obs_dim, act_dim, action_scale, seed):
        """Warm start for a (possibly) different morphology.

        Hidden layers are copied; the input and output layers are re-initialized
        whenever their dims differ from the checkpoint's.
        """
        meta, arrays = ckpt.load_arrays(path)
        pol = cls(obs_dim, act_dim, meta["hidden"], action_scale, seed)
        src = cls(meta["obs_dim"], meta["act_dim"], meta["hidden"],
                  meta["action_scale"], seed=0)
        for k in src.params:
            src.params[k][...] = arrays[k]
        for name, spec_attr in (("policy_net", "policy_spec"), ("value_net", "value_spec")):
            dst_layers = nets.unpack_params(getattr(pol, spec_attr), pol.params[name])
            src_layers = nets.unpack_params(getattr(src, spec_attr), src.params[name])
            for li, ((dw, db), (sw, sb)) in enumerate(zip(dst_layers, src_layers)):
                if dw.shape == sw.shape:
                    dw[...] = sw
                    db[...] = sb
        if act_dim == meta["act_dim"]:
            pol.params["log_std"][...] = src.params["log_std"]
        return pol


def _ppo_core(logp_t, value_t, log_std_t, mb, cfg, stats):
    """Clipped-surrogate policy loss, value MSE, and entropy (graph scalars)."""
    n = mb["obs"].shape[0]
    adv = mb["advantages"]
    if n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    stats["adv_mean"] = float(adv.mean())
    stats["adv_std"] = float(adv.std())
    ratio = ad.exp(ad.sub(logp_t, ad.Tensor(mb["log_probs"])))
    clipped = ad.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    adv_t = ad.Tensor(adv)
    surrogate = ad.minimum(ad.mul(ratio, adv_t), ad.mul(clipped, adv_t))
    policy_loss = ad.neg(ad.mean(surrogate))
    value_loss = ad.scale(
        ad.sq_err(value_t, ad.Tensor(mb["returns"][:, None])), 1.0 / n)
    entropy = nets.gaussian_entropy_graph(log_std_t)
    stats["L_policy"] = policy_loss.item()
    stats["value_loss"] = value_loss.item()
    stats["entropy"] = entropy.item()
    stats["ratio_mean"] = float(np.mean(ratio.data))
    return policy_loss, value_loss, entropy


# --- rollout collection --------------------------------------------------------

def collect_rollouts(policy, envs: EnvBatch, curriculum: curr.CurriculumState,
                     cfg: PpoConfig, rng, level_cap=None):
    """Fill a buffer by stepping all envs rollout_length times.

    Episodes ending mid-rollout are judged, curriculum-updated (optionally
    capped), and reset at their new level.
    """
    T, n = cfg.rollout_length, envs.n
    obs_dim, act_dim = envs.morph.obs_dim, envs.morph.act_dim
    buf = RolloutBuffer(
        obs=np.zeros((T, n, obs_dim)),
        lat_actions=np.zeros((T, n, policy.lat_dim)),
        actions=np.zeros((T, n, act_dim)),
        log_probs=np.zeros((T, n)),
        rewards=np.zeros((T, n)),
        values=np.zeros((T, n)),
        dones=np.zeros((T, n)),
        episode_infos=[],
    )

    def on_episode_end(i, info):
        outcome = curr.judge_episode(info, curriculum.success_threshold)
        curr.update_level(curriculum, i, outcome)
        if level_cap is not None:
            curriculum.levels[i] = min(curriculum.levels[i], level_cap)
        buf.episode_infos.append(info)
        return int(curriculum.levels[i])

    obs = envs.observe()
    for t in range(T):
        if not np.all(np.isfinite(obs)):
            bad = np.argwhere(~np.isfinite(obs))[0]
            raise FloatingPointError(
                f"non-finite observation in env {bad[0]} at rollout step {t}")
        actions, lat, logp, value = policy.act_batch(obs, rng)
        next_obs, rewards, dones, _ = envs.step(actions, on_episode_end=on_episode_end)
        buf.obs[t] = obs
        buf.lat_actions[t] = lat
        buf.actions[t] = np.clip(actions, -envs.morph.action_scale,
                                 envs.morph.action_scale)
        buf.log_probs[t] = logp
        buf.rewards[t] = rewards
        buf.values[t] = value
        buf.dones[t] = dones
        obs = next_obs

    buf.last_values = policy.value_batch(obs)
    buf.advantages, buf.returns = compute_gae(
        buf.rewards, buf.values, buf.dones, buf.last_values,
        cfg.gamma, cfg.gae_lambda)
    return buf


def ppo_update(policy, buf: RolloutBuffer, cfg: PpoConfig, optimizer, rng):
    """Epochs of shuffled minibatch updates; returns mean loss components."""
    T, n = buf.rewards.shape
    flat = {
        "obs": buf.obs.reshape(T * n, -1),
        "lat_actions": buf.lat_actions.reshape(T * n, -1),
        "log_probs": buf.log_probs.reshape(T * n),
        "advantages": buf.advantages.reshape(T * n),
        "returns": buf.returns.reshape(T * n),
    }
    total = T * n
    mb_size = min(cfg.minibatch_size, total)
    agg = {}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(total)
        for start in range(0, total - mb_size + 1, mb_size):
            idx = order[start:start + mb_size]
            mb = {k: v[idx] for k, v in flat.items()}
            loss, stats = policy.loss_graph(mb, cfg, rng)
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"non-finite PPO loss: {stats}")
            optimizer.zero_grad()
            ad.backward(loss)
            optimizer.step()
            for k, v in stats.items():
                agg[k] = agg.get(k, 0.0) + v
            count += 1
    return {k: v / count for k, v in agg.items()}


# --- training loop ---------------------------------------------------------------

CSV_HEADER = "iteration,mean_reward,mean_level,L_policy,L_s,L_a,entropy,wallclock"


def run_training(policy, envs, curriculum, cfg: PpoConfig, rng, out_dir=None,
                 level_cap=None, deterministic=True, log_every=0):
    """The iteration loop: collect, GAE, update, log one CSV row per iteration.

    Returns curves {mean_reward, mean_level, L_policy, L_s, L_a, entropy}.
    In deterministic mode the wallclock column is written as 0.0 so archived
    configs reproduce runs bit-identically.
    """
    optimizer = ad.Adam(policy.trainable_tensors(), lr=cfg.learning_rate,
                        max_grad_norm=cfg.max_grad_norm)
    recent_returns = []
    curves = {k: [] for k in ("mean_reward", "mean_level", "L_policy",
                              "L_s", "L_a", "entropy")}
    csv_path = None
    if out_dir is not None:
        csv_path = f"{out_dir}/metrics.csv"
        with open(csv_path, "w") as f:
            f.write(CSV_HEADER + "\n")
    t0 = time.perf_counter()

    for it in range(cfg.iterations):
        buf = collect_rollouts(policy, envs, curriculum, cfg, rng, level_cap)
        stats = ppo_update(policy, buf, cfg, optimizer, rng)
        for info in buf.episode_infos:
            recent_returns.append(info["episode_return"])
        recent_returns = recent_returns[-100:]
        mean_reward = float(np.mean(recent_returns)) if recent_returns else 0.0
        level = curr.mean_level(curriculum)

        curves["mean_reward"].append(mean_reward)
        curves["mean_level"].append(level)
        curves["L_policy"].append(stats["L_policy"])
        curves["L_s"].append(stats["L_s"])
        curves["L_a"].append(stats["L_a"])
        curves["entropy"].append(stats["entropy"])

        if csv_path is not None:
            wallclock = 0.0 if deterministic else time.perf_counter() - t0
            with open(csv_path, "a") as f:
                f.write(f"{it},{mean_reward:.17g},{level:.17g},"
                        f"{stats['L_policy']:.17g},{stats['L_s']:.17g},"
                        f"{stats['L_a']:.17g},{stats['entropy']:.17g},"
                        f"{wallclock:.17g}\n")
        if log_every and (it + 1) % log_every == 0:
            print(f"[{it + 1}/{cfg.iterations}] reward={mean_reward:.1f} "
                  f"level={level:.2f} L_policy={stats['L_policy']:.4f}")

    return {k: np.asarray(v) for k, v in curves.items()}


def make_envs(morph, cfg: PpoConfig, seed, env_cfg=EnvConfig(), kinds=KINDS,
              start_level=0):
    assigned = curr.assign_kinds_round_robin(cfg.n_envs, list(kinds))
    envs = EnvBatch(morph, assigned, [start_level] * cfg.n_envs, seed, env_cfg)
    curriculum = curr.CurriculumState.create(cfg.n_envs, assigned, start_level)
    return envs, curriculum


# --- stages ------------------------------------------------------------------------

def l3p_dims_for(morph, latent_obs_dim=64, latent_act_dim=16):
    return L3PDims(morph.obs_dim, morph.act_dim, latent_obs_dim, latent_act_dim)


def pretrain_stage(morph, cfg: PpoConfig, seed, out_dir=None,
                   latent_obs_dim=64, latent_act_dim=16,
                   hidden=ModelHidden(), env_cfg=EnvConfig(), kinds=KINDS,
                   obs_recovery_kind="diffusion", deterministic=True,
                   log_every=0):
    """Joint training of all modules on the prototype across all track kinds."""
    model = L3PModel(l3p_dims_for(morph, latent_obs_dim, latent_act_dim),
                     seed=seed, hidden=hidden,
                     action_scale=morph.action_scale,
                     obs_recovery_kind=obs_recovery_kind)
    policy = L3PPolicy(model)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    envs, curriculum = make_envs(morph, cfg, np.random.SeedSequence([seed, 2]),
                                 env_cfg, kinds)
    curves = run_training(policy, envs, curriculum, cfg, rng, out_dir,
                          deterministic=deterministic, log_every=log_every)
    if out_dir is not None:
        ckpt.save_model(model, f"{out_dir}/checkpoint.npz")
    return policy, curves


def transfer_entity_stage(ckpt_path, new_morph, cfg: PpoConfig, seed,
                          out_dir=None, env_cfg=EnvConfig(), kinds=KINDS,
                          deterministic=True, log_every=0):
    """Frozen-backbone adaptation to a new morphology; verifies the freeze."""
    dims_ckpt, _ = _peek_dims(ckpt_path)
    model = ckpt.load_backbone(
        ckpt_path, L3PDims(new_morph.obs_dim, new_morph.act_dim,
                           dims_ckpt["latent_obs_dim"], dims_ckpt["latent_act_dim"]),
        seed)
    model.action_scale = new_morph.action_scale
    hash_before = model.backbone_hash()
    policy = L3PPolicy(model)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    envs, curriculum = make_envs(new_morph, cfg, np.random.SeedSequence([seed, 4]),
                                 env_cfg, kinds)
    curves = run_training(policy, envs, curriculum, cfg, rng, out_dir,
                          deterministic=deterministic, log_every=log_every)
    hash_after = model.backbone_hash()
    if hash_before != hash_after:
        raise AssertionError("backbone changed during a frozen transfer run")
    if out_dir is not None:
        ckpt.save_model(model, f"{out_dir}/checkpoint.npz")
    return policy, curves, {"backbone_hash_before": hash_before,
                            "backbone_hash_after": hash_after}


def transfer_terrain_stage(ckpt_path, new_morph, cfg: PpoConfig, seed,
                           out_dir=None, env_cfg=EnvConfig(),
                           fine_tune_kinds=("random_rough",), level_cap=2,
                           eval_kinds=KINDS, eval_episodes=5,
                           deterministic=True, log_every=0, baseline="l3p"):
    """Fine-tune on restricted simple terrain, then zero-shot max-level sweep.

    ``baseline='mlp'`` runs the same protocol for an MLP checkpoint (continual
    training of the whole net).  Returns (policy, curves, report) where report
    maps terrain kind -> max achieved level.
    """
    if baseline == "l3p":
        dims_ckpt, _ = _peek_dims(ckpt_path)
        model = ckpt.load_backbone(
            ckpt_path, L3PDims(new_morph.obs_dim, new_morph.act_dim,
                               dims_ckpt["latent_obs_dim"], dims_ckpt["latent_act_dim"]),
            seed)
        model.action_scale = new_morph.action_scale
        policy = L3PPolicy(model)
    elif baseline == "mlp":
        policy = MLPPolicy.from_pretrained(ckpt_path, new_morph.obs_dim,
                                           new_morph.act_dim,
                                           new_morph.action_scale, seed)
    else:
        raise ValueError(f"unknown baseline {baseline!r}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    envs, curriculum = make_envs(new_morph, cfg, np.random.SeedSequence([seed, 6]),
                                 env_cfg, fine_tune_kinds)
    curves = run_training(policy, envs, curriculum, cfg, rng, out_dir,
                          level_cap=level_cap, deterministic=deterministic,
                          log_every=log_every)
    report = {kind: eval_max_level(policy, new_morph, kind, seed=seed + 7,
                                   env_cfg=env_cfg, episodes=eval_episodes)
              for kind in eval_kinds}
    if out_dir is not None:
        policy.save(f"{out_dir}/checkpoint.npz")
        with open(f"{out_dir}/terrain_report.csv", "w") as f:
            f.write("kind,max_level\n")
            for kind, lvl in report.items():
                f.write(f"{kind},{lvl}\n")
    return policy, curves, report


def baseline_mlp_stage(morph, cfg: PpoConfig, seed, hidden, out_dir=None,
                       env_cfg=EnvConfig(), kinds=KINDS, init=None,
                       deterministic=True, log_every=0):
    """End-to-end MLP baseline; ``init`` warm-starts from a checkpoint path."""
    if init is None:
        policy = MLPPolicy(morph.obs_dim, morph.act_dim, hidden,
                           morph.action_scale, seed)
    else:
        policy = MLPPolicy.from_pretrained(init, morph.obs_dim, morph.act_dim,
                                           morph.action_scale, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 8]))
    envs, curriculum = make_envs(morph, cfg, np.random.SeedSequence([seed, 9]),
                                 env_cfg, kinds)
    curves = run_training(policy, envs, curriculum, cfg, rng, out_dir,
                          deterministic=deterministic, log_every=log_every)
    if out_dir is not None:
        policy.save(f"{out_dir}/checkpoint.npz")
    return policy, curves


def _peek_dims(path):
    meta, _ = ckpt.load_arrays(path)
    return meta["dims"], meta


# --- evaluation ---------------------------------------------------------------------

def run_episode(policy, envs: EnvBatch, max_steps=None):
    """One deterministic episode on env 0 of a single-env batch."""
    obs = envs.reset_env(0)[None, :]
    steps = max_steps or envs.cfg.horizon
    for _ in range(steps):
        actions, _, _, _ = policy.act_batch(obs, None, deterministic=True)
        captured = {}
        obs, _, dones, infos = envs.step(
            actions, on_episode_end=lambda i, info: captured.update(info) or None)
        if dones[0]:
            return captured
    return captured


def eval_max_level(policy, morph, kind, seed, env_cfg=EnvConfig(), episodes=5,
                   success_threshold=0.8, success_rate=0.5):
    """Highest consecutive level from 0 whose success rate clears 50%.

    Returns -1 when the policy cannot pass level 0.
    """
    best = -1
    for level in range(10):
        wins = 0
        for ep in range(episodes):
            envs = EnvBatch(morph, [kind], [level],
                            np.random.SeedSequence([seed, level, ep]), env_cfg)
            info = run_episode(policy, envs)
            if info and curr.judge_episode(info, success_threshold) == "success":
                wins += 1
        if wins / episodes >= success_rate:
            best = level
        else:
            break
    return best


def eval_tracking(policy, morph, kinds, level, seed, env_cfg=EnvConfig(),
                  episodes=4):
    """Mean absolute tracking errors (%) at a fixed difficulty level."""
    vel_errs, rate_errs, cmds_v, cmds_w = [], [], [], []
    for ep, kind in enumerate(k for k in kinds for _ in range(episodes)):
        envs = EnvBatch(morph, [kind], [level],
                        np.random.SeedSequence([seed, 11, ep]), env_cfg)
        cmd = envs.commands[0].copy()
        info = run_episode(policy, envs)
        if not info:
            continue
        vel_errs.append(info["vel_err"])
        rate_errs.append(info["rate_err"])
        cmds_v.append(abs(cmd[0]))
        cmds_w.append(abs(cmd[1]))
    if not vel_errs:
        return float("nan"), float("nan")
    vel_pct = 100.0 * float(np.mean(vel_errs)) / max(float(np.mean(cmds_v)), 1e-9)
    rate_pct = 100.0 * float(np.mean(rate_errs)) / max(float(np.mean(cmds_w)), 1e-9)
    return vel_pct, rate_pct


def random_policy_returns(morph, seed, env_cfg=EnvConfig(), kinds=KINDS,
                          episodes=30, level=0):
    """Episode returns of uniform-random actions at a fixed level (baseline)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    returns = []
    for ep in range(episodes):
        envs = EnvBatch(morph, [kinds[ep % len(kinds)]], [level],
                        np.random.SeedSequence([seed, 14, ep]), env_cfg)
        done = False
        captured = {}
        while not done:
            a = rng.uniform(-morph.action_scale, morph.action_scale,
                            (1, morph.act_dim))
            _, _, dones, infos = envs.step(
                a, on_episode_end=lambda i, info: captured.update(info) or None)
            done = bool(dones[0])
        returns.append(captured["episode_return"])
    return np.asarray(returns)


# --- supervised reconstruction fitting (no RL) -----------------------------------

def reconstruction_fit(model: L3PModel, states, steps, rng, lr=1e-3,
                       batch_size=128):
    """Minimize the reconstruction pair alone on a fixed state dataset.

    Latent actions are taken from the current policy head (mean), so the loss
    exercises the same encode -> recover and decode -> recover paths as the
    joint objective.  Returns the per-step (L_s, L_a) history.
    """
    states = np.asarray(states, dtype=np.float64)
    parts = ["obs_encoder", "obs_recovery", "action_decoder", "act_recovery"]
    tensors = [t for p in parts for t in model.tensors[p]]
    opt = ad.Adam(tensors, lr=lr)
    history = np.zeros((steps, 2))
    n = states.shape[0]
    for step in range(steps):
        mb = states[rng.integers(0, n, batch_size)]
        h_t = model.encode_graph(ad.Tensor(mb))
        z = model.policy_mean(model.encode(mb))
        l_s, l_a = model.recon_losses_graph(mb, h_t, z, rng)
        loss = ad.add(l_s, l_a)
        opt.zero_grad()
        ad.backward(loss)
        opt.step()
        history[step] = (l_s.item(), l_a.item())
    return history
