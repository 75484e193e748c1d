"""Command-line entry point: config loading, run-directory management, and
dispatch to the training stages and the experiment harness.

Exit codes: 0 success, 1 validation/usage error, 2 runtime abort.
"""

import argparse
import os
import sys
import time
import traceback

from . import experiments, trainer
from .config import ConfigError, RunConfig, out_root, parse_config, serialize_config

COMMANDS = ("pretrain", "transfer-entity", "transfer-terrain", "matrix",
            "ablate", "report")


def _make_run_dir(cfg: RunConfig, command, suffix=""):
    stamp = time.strftime("%Y%m%d-%H%M%S")
    name = f"{cfg.name}-{stamp}-{command}{suffix}"
    path = os.path.join(out_root(cfg), name)
    n = 0
    while os.path.exists(path):  # same-second collisions
        n += 1
        path = os.path.join(out_root(cfg), f"{name}.{n}")
    os.makedirs(path)
    with open(os.path.join(path, "config.ini"), "w") as f:
        f.write(serialize_config(cfg))
    return path


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def cmd_pretrain(cfg: RunConfig, args):
    _require(cfg.method in ("l3p", "mlp"),
             f"pretrain runs method l3p or mlp, not {cfg.method!r}")
    morph = cfg.morphology(cfg.prototype)
    for seed in cfg.seeds:
        run_dir = _make_run_dir(cfg, "pretrain", f"-s{seed}")
        if cfg.method == "l3p":
            trainer.pretrain_stage(
                morph, cfg.ppo, seed, out_dir=run_dir,
                latent_obs_dim=cfg.latent_obs_dim,
                latent_act_dim=cfg.latent_act_dim, kinds=cfg.terrain_kinds,
                obs_recovery_kind=cfg.obs_recovery_kind,
                deterministic=cfg.deterministic, log_every=args.log_every)
        else:
            from .config import mlp_hidden_for_parity
            hidden = mlp_hidden_for_parity(cfg, morph)
            trainer.baseline_mlp_stage(morph, cfg.ppo, seed, hidden,
                                       out_dir=run_dir, kinds=cfg.terrain_kinds,
                                       deterministic=cfg.deterministic,
                                       log_every=args.log_every)
        print(run_dir)
    return 0


def cmd_transfer_entity(cfg: RunConfig, args):
    _require(cfg.pretrain_checkpoint,
             "transfer-entity needs [transfer] pretrain_checkpoint")
    _require(os.path.isfile(cfg.pretrain_checkpoint),
             f"checkpoint not found: {cfg.pretrain_checkpoint}")
    target = cfg.morphology(cfg.morphologies[0])
    for seed in cfg.seeds:
        run_dir = _make_run_dir(cfg, "transfer-entity", f"-s{seed}")
        _, _, hashes = trainer.transfer_entity_stage(
            cfg.pretrain_checkpoint, target, cfg.ppo, seed, out_dir=run_dir,
            kinds=cfg.terrain_kinds, deterministic=cfg.deterministic,
            log_every=args.log_every)
        print(run_dir, hashes["backbone_hash_after"][:12])
    return 0


def cmd_transfer_terrain(cfg: RunConfig, args):
    _require(cfg.pretrain_checkpoint,
             "transfer-terrain needs [transfer] pretrain_checkpoint")
    _require(os.path.isfile(cfg.pretrain_checkpoint),
             f"checkpoint not found: {cfg.pretrain_checkpoint}")
    baseline = "mlp" if cfg.method == "mlp-transfer" else "l3p"
    target = cfg.morphology(cfg.morphologies[0])
    for seed in cfg.seeds:
        run_dir = _make_run_dir(cfg, "transfer-terrain", f"-s{seed}")
        _, _, report = trainer.transfer_terrain_stage(
            cfg.pretrain_checkpoint, target, cfg.ppo, seed, out_dir=run_dir,
            fine_tune_kinds=cfg.fine_tune_kinds,
            level_cap=cfg.fine_tune_level_cap, eval_kinds=cfg.terrain_kinds,
            deterministic=cfg.deterministic, log_every=args.log_every,
            baseline=baseline)
        print(run_dir, report)
    return 0


def cmd_matrix(cfg: RunConfig, args):
    run_dir = args.resume or _make_run_dir(cfg, "matrix")
    summary, failures = experiments.run_matrix(cfg, run_dir,
                                               log_every=args.log_every)
    print(run_dir)
    if failures:
        print(f"{len(failures)} cell(s) failed:",
              ", ".join(f"{m}/{mo}/s{s}" for m, mo, s in failures))
    return 0


def cmd_ablate(cfg: RunConfig, args):
    run_dir = args.resume or _make_run_dir(cfg, "ablate")
    files = experiments.ablate_latent(cfg, run_dir, log_every=args.log_every)
    print(run_dir)
    for setting, path in files.items():
        print(f"  {setting}: {path}")
    return 0


def cmd_report(cfg: RunConfig, args):
    run_dir = args.run_dir
    _require(run_dir and os.path.isdir(run_dir), f"not a run directory: {run_dir}")
    made = []
    metrics = os.path.join(run_dir, "metrics.csv")
    if os.path.isfile(metrics):
        m = experiments.read_metrics(metrics)
        made.append(experiments.emit_plots(
            {"mean_reward": m["mean_reward"]},
            os.path.join(run_dir, "reward.svg"), title="training reward",
            ylabel="episode return"))
        made.append(experiments.emit_plots(
            {"mean_level": m["mean_level"]},
            os.path.join(run_dir, "level.svg"), title="curriculum level",
            ylabel="mean level"))
    cells = os.path.join(run_dir, "cells")
    if os.path.isdir(cells):
        experiments.aggregate_matrix(cfg, run_dir)
        made.append(os.path.join(run_dir, "summary.csv"))
        for morph_name in cfg.morphologies:
            series = {}
            for method in cfg.methods:
                curves = []
                for seed in cfg.seeds:
                    path = os.path.join(cells, f"{method}__{morph_name}__s{seed}",
                                        "metrics.csv")
                    if os.path.isfile(path):
                        curves.append(experiments.read_metrics(path)["mean_level"])
                if curves:
                    import numpy as np
                    series[method] = np.mean(curves, axis=0)
            if series:
                made.append(experiments.emit_plots(
                    series, os.path.join(run_dir, f"levels_{morph_name}.svg"),
                    title=f"{morph_name} level curves", ylabel="mean level"))
    _require(made, f"nothing to report in {run_dir} (no metrics.csv or cells/)")
    for p in made:
        print(p)
    return 0


_HANDLERS = {
    "pretrain": cmd_pretrain,
    "transfer-entity": cmd_transfer_entity,
    "transfer-terrain": cmd_transfer_terrain,
    "matrix": cmd_matrix,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentloco",
        description="Latent-to-latent locomotion policy training and transfer "
                    "experiments on planar legged robots.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--log-every", type=int, default=0,
                       help="print progress every N iterations")
        if name in ("matrix", "ablate"):
            p.add_argument("--resume", default="",
                           help="existing run directory to resume into")
        if name == "report":
            p.add_argument("--run-dir", required=True,
                           help="run or matrix directory to summarize")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (FloatingPointError, AssertionError) as e:
        print(f"runtime abort: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
