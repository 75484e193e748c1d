"""Evaluation harness: convergence metrics, the method x morphology x seed
matrix, the latent-dimension ablation, aggregation, and report emission.

Matrix cells are independent and resumable: a cell whose outputs are complete
is skipped untouched on rerun.  Transfer methods consume prototype pretrain
checkpoints produced (once per seed) inside the matrix directory.
"""

import csv
import json
import os
import traceback

import numpy as np

from . import plots, trainer
from .config import RunConfig, mlp_hidden_for_parity

SUMMARY_COLUMNS = ("task", "method", "cv85", "cv95", "level_mean", "level_var",
                   "reward_mean", "reward_var", "vel_err_pct", "rate_err_pct")
TRACKING_EVAL_LEVEL = 3
DEFAULT_SMOOTHING = 10


def smooth(values, window=DEFAULT_SMOOTHING):
    """Trailing moving average with a ramp-up head (window >= 1)."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("smoothing window must be >= 1")
    if values.size == 0:
        raise ValueError("empty curve")
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(values.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out


def final_value(values, window=DEFAULT_SMOOTHING):
    """Mean of the last 10% of the smoothed curve (at least one sample)."""
    sm = smooth(values, window)
    k = max(1, sm.size // 10)
    return float(np.mean(sm[-k:]))


def convergence_step(values, pct, window=DEFAULT_SMOOTHING):
    """First index where the smoothed curve reaches pct * final and stays there.

    ``final`` is the tail mean of the smoothed curve.  Returns the curve
    length when the threshold is never sustained.
    """
    if pct not in (0.85, 0.95):
        if not 0.0 < pct < 1.0:
            raise ValueError(f"pct must lie in (0, 1), got {pct}")
    sm = smooth(values, window)
    threshold = pct * final_value(values, window)
    above = sm >= threshold
    # smallest i such that above[i:] is all True
    for i in range(sm.size):
        if above[i:].all():
            return i
    return sm.size


def tracking_errors(vel_series, rate_series, commands):
    """Percent deviation of achieved velocity / pitch rate from the commands.

    Per-episode mean absolute errors, normalized by the mean absolute command
    across episodes, averaged; returns (vel_err_pct, rate_err_pct).
    """
    if len(vel_series) == 0:
        raise ValueError("no evaluation trajectories")
    vel_err = float(np.mean([np.mean(np.abs(np.asarray(v) - c[0]))
                             for v, c in zip(vel_series, commands)]))
    rate_err = float(np.mean([np.mean(np.abs(np.asarray(w) - c[1]))
                              for w, c in zip(rate_series, commands)]))
    mean_v = float(np.mean([abs(c[0]) for c in commands]))
    mean_w = float(np.mean([abs(c[1]) for c in commands]))
    return (100.0 * vel_err / max(mean_v, 1e-9),
            100.0 * rate_err / max(mean_w, 1e-9))


# --- metrics files -------------------------------------------------------------

def read_metrics(path):
    """Load a per-iteration metrics CSV into {column: array}."""
    with open(path) as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    if not rows:
        raise ValueError(f"empty metrics file: {path}")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def _complete(cell_dir, iterations):
    metrics = os.path.join(cell_dir, "metrics.csv")
    ck = os.path.join(cell_dir, "checkpoint.npz")
    if not (os.path.isfile(metrics) and os.path.isfile(ck)):
        return False
    with open(metrics) as f:
        n_rows = sum(1 for _ in f) - 1
    return n_rows >= iterations


# --- the experiment matrix -------------------------------------------------------

def _pretrain_dir(matrix_dir, method, seed):
    return os.path.join(matrix_dir, "pretrain", f"{method}-s{seed}")


def _cell_dir(matrix_dir, method, morph_name, seed):
    return os.path.join(matrix_dir, "cells", f"{method}__{morph_name}__s{seed}")


def _ensure_pretrain(cfg: RunConfig, matrix_dir, family, seed, log_every=0):
    """Train (or reuse) the prototype checkpoint a transfer method starts from."""
    out = _pretrain_dir(matrix_dir, family, seed)
    if _complete(out, cfg.ppo.iterations):
        return os.path.join(out, "checkpoint.npz")
    os.makedirs(out, exist_ok=True)
    proto = cfg.morphology(cfg.prototype)
    if family == "l3p":
        trainer.pretrain_stage(
            proto, cfg.ppo, seed, out_dir=out,
            latent_obs_dim=cfg.latent_obs_dim, latent_act_dim=cfg.latent_act_dim,
            kinds=cfg.terrain_kinds, obs_recovery_kind=cfg.obs_recovery_kind,
            deterministic=cfg.deterministic, log_every=log_every)
    else:
        hidden = mlp_hidden_for_parity(cfg, proto)
        trainer.baseline_mlp_stage(proto, cfg.ppo, seed, hidden, out_dir=out,
                                   kinds=cfg.terrain_kinds,
                                   deterministic=cfg.deterministic,
                                   log_every=log_every)
    return os.path.join(out, "checkpoint.npz")


def run_cell(cfg: RunConfig, matrix_dir, method, morph_name, seed, log_every=0):
    """Execute one (method, morphology, seed) cell; returns its directory."""
    cell = _cell_dir(matrix_dir, method, morph_name, seed)
    if _complete(cell, cfg.ppo.iterations):
        return cell
    os.makedirs(cell, exist_ok=True)
    morph = cfg.morphology(morph_name)

    if method == "l3p":
        policy, _ = trainer.pretrain_stage(
            morph, cfg.ppo, seed, out_dir=cell,
            latent_obs_dim=cfg.latent_obs_dim, latent_act_dim=cfg.latent_act_dim,
            kinds=cfg.terrain_kinds, obs_recovery_kind=cfg.obs_recovery_kind,
            deterministic=cfg.deterministic, log_every=log_every)
    elif method == "mlp":
        hidden = mlp_hidden_for_parity(cfg, morph)
        policy, _ = trainer.baseline_mlp_stage(
            morph, cfg.ppo, seed, hidden, out_dir=cell, kinds=cfg.terrain_kinds,
            deterministic=cfg.deterministic, log_every=log_every)
    elif method == "l3p-transfer":
        ck = _ensure_pretrain(cfg, matrix_dir, "l3p", seed, log_every)
        policy, _, _ = trainer.transfer_entity_stage(
            ck, morph, cfg.ppo, seed, out_dir=cell, kinds=cfg.terrain_kinds,
            deterministic=cfg.deterministic, log_every=log_every)
    elif method == "mlp-transfer":
        ck = _ensure_pretrain(cfg, matrix_dir, "mlp", seed, log_every)
        policy, _ = trainer.baseline_mlp_stage(
            morph, cfg.ppo, seed, mlp_hidden_for_parity(cfg, morph),
            out_dir=cell, kinds=cfg.terrain_kinds, init=ck,
            deterministic=cfg.deterministic, log_every=log_every)
    else:
        raise ValueError(f"unknown method {method!r}")

    vel_pct, rate_pct = trainer.eval_tracking(policy, morph, cfg.terrain_kinds,
                                              TRACKING_EVAL_LEVEL, seed)
    with open(os.path.join(cell, "eval.json"), "w") as f:
        json.dump({"vel_err_pct": vel_pct, "rate_err_pct": rate_pct}, f)
    return cell


def run_matrix(cfg: RunConfig, matrix_dir, log_every=0):
    """Run every (method, morphology, seed) cell, then aggregate the summary.

    A failing cell is recorded in FAILED and skipped; completed cells are
    never recomputed.
    """
    os.makedirs(matrix_dir, exist_ok=True)
    failures = []
    for method in cfg.methods:
        for morph_name in cfg.morphologies:
            for seed in cfg.seeds:
                try:
                    run_cell(cfg, matrix_dir, method, morph_name, seed, log_every)
                except Exception:
                    cell = _cell_dir(matrix_dir, method, morph_name, seed)
                    os.makedirs(cell, exist_ok=True)
                    with open(os.path.join(cell, "FAILED"), "w") as f:
                        f.write(traceback.format_exc())
                    failures.append((method, morph_name, seed))
    summary = aggregate_matrix(cfg, matrix_dir)
    return summary, failures


def aggregate_matrix(cfg: RunConfig, matrix_dir):
    """Build summary.csv (one row per task x method) from cell outputs."""
    rows = []
    for morph_name in cfg.morphologies:
        for method in cfg.methods:
            cells = []
            for seed in cfg.seeds:
                cell = _cell_dir(matrix_dir, method, morph_name, seed)
                if not _complete(cell, cfg.ppo.iterations):
                    continue
                m = read_metrics(os.path.join(cell, "metrics.csv"))
                with open(os.path.join(cell, "eval.json")) as f:
                    ev = json.load(f)
                cells.append((m, ev))
            if not cells:
                continue
            cv85 = [convergence_step(m["mean_reward"], 0.85) for m, _ in cells]
            cv95 = [convergence_step(m["mean_reward"], 0.95) for m, _ in cells]
            levels = [final_value(m["mean_level"]) for m, _ in cells]
            rewards = [final_value(m["mean_reward"]) for m, _ in cells]
            rows.append({
                "task": morph_name,
                "method": method,
                "cv85": float(np.mean(cv85)),
                "cv95": float(np.mean(cv95)),
                "level_mean": float(np.mean(levels)),
                "level_var": float(np.var(levels)),
                "reward_mean": float(np.mean(rewards)),
                "reward_var": float(np.var(rewards)),
                "vel_err_pct": float(np.mean([e["vel_err_pct"] for _, e in cells])),
                "rate_err_pct": float(np.mean([e["rate_err_pct"] for _, e in cells])),
            })
    path = os.path.join(matrix_dir, "summary.csv")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows


# --- latent-dimension ablation -----------------------------------------------------

def ablate_latent(cfg: RunConfig, out_dir, dims_obs=None, dims_act=None,
                  log_every=0):
    """Pretrain per latent-dimension setting; one mean level-curve file each."""
    dims_obs = tuple(dims_obs or cfg.ablate_dims_obs)
    dims_act = tuple(dims_act or cfg.ablate_dims_act)
    if any(d < 1 for d in dims_obs + dims_act):
        raise ValueError("ablation dims must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    proto = cfg.morphology(cfg.prototype)
    settings = ([("obs", d, d, cfg.latent_act_dim) for d in dims_obs]
                + [("act", d, cfg.latent_obs_dim, d) for d in dims_act])
    curve_files = {}
    for axis, d, h_dim, z_dim in settings:
        level_curves = []
        for seed in cfg.seeds:
            run_dir = os.path.join(out_dir, f"{axis}{d}-s{seed}")
            if not _complete(run_dir, cfg.ppo.iterations):
                os.makedirs(run_dir, exist_ok=True)
                trainer.pretrain_stage(
                    proto, cfg.ppo, seed, out_dir=run_dir,
                    latent_obs_dim=h_dim, latent_act_dim=z_dim,
                    kinds=cfg.terrain_kinds,
                    obs_recovery_kind=cfg.obs_recovery_kind,
                    deterministic=cfg.deterministic, log_every=log_every)
            level_curves.append(read_metrics(
                os.path.join(run_dir, "metrics.csv"))["mean_level"])
        mean_curve = np.mean(level_curves, axis=0)
        path = os.path.join(out_dir, f"curve_{axis}{d}.csv")
        with open(path, "w") as f:
            f.write("iteration,mean_level\n")
            for i, v in enumerate(mean_curve):
                f.write(f"{i},{v:.17g}\n")
        curve_files[f"{axis}{d}"] = path
    return curve_files


# --- plots ---------------------------------------------------------------------------

def emit_plots(curves, path, title="", ylabel=""):
    """Write a line chart SVG for named curves (non-empty)."""
    if not curves:
        raise ValueError("emit_plots: no curves")
    return plots.svg_line_chart(curves, path, title=title, ylabel=ylabel)


def emit_radar(reports, path, title="terrain transfer"):
    """Radar SVG from {method: {kind: max_level}} terrain reports."""
    kinds = list(next(iter(reports.values())).keys())
    series = {method: [rep[k] for k in kinds] for method, rep in reports.items()}
    return plots.svg_radar_chart(kinds, series, path, title=title, max_value=9)
