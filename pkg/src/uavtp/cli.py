"""Command-line front end.

Subcommands:
  train        run training, write manifest.json, episodes.csv, checkpoint.bin
  eval         greedy rollout from a checkpoint, write trajectory.csv, summary.json
  inspect-obs  dump the three observation channels as CSV matrices per slot
  report       render figures from a run directory's CSV artifacts

Exit codes: 0 ok, 2 bad config, 3 unusable output directory, 4 checkpoint
shape mismatch.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import channel as ch
from . import environment as env
from . import qnet, report
from .config import ConfigError, config_to_dict, load_config
from .observation import build_observation
from .trainer import TrainConfig, Trainer, evaluate
from .world import spawn_world

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_BAD_OUTDIR = 3
EXIT_SHAPE_MISMATCH = 4

EPISODE_FIELDS = ("episode", "total_reward", "steps", "final_fairness",
                  "throughput_bits", "energy_used", "mean_td_loss", "n_gus")
TRAJECTORY_FIELDS = ("t", "x_cell", "y_cell", "action", "reward", "fairness",
                     "throughput_bits", "energy_used", "n_served")


def _fmt(value):
    """Full-precision decimal text for floats, plain text otherwise."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def _prepare_outdir(out):
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory {out!r} is not writable: {exc}", file=sys.stderr)
        return False
    return True


def _resolve_config(args):
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "trend_mode", None):
        overrides.append(f"trend_mode={args.trend_mode}")
    return load_config(args.config, overrides)


def _write_manifest(out, command, cfg, train_cfg, artifacts):
    manifest = {
        "command": command,
        "seed": cfg.seed,
        "config": config_to_dict(cfg),
        "train_config": dataclasses.asdict(train_cfg) if train_cfg else None,
        "output_dir": os.path.abspath(out),
        "artifacts": artifacts,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def cmd_train(args):
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if not _prepare_outdir(args.out):
        return EXIT_BAD_OUTDIR

    train_cfg = TrainConfig(
        episodes=args.episodes,
        online_update_interval=args.online_interval,
        offline_updates_per_episode=args.offline_updates,
        batch_size=args.batch_size,
        target_sync_interval=args.sync_interval,
        learning_rate=args.lr,
        offline_capacity=args.offline_capacity,
        online_capacity=args.online_capacity,
        offline_pool_limit=args.pool_limit,
        gu_growth=args.gu_growth,
    )
    artifacts = ["episodes.csv", "checkpoint.bin"]
    _write_manifest(args.out, "train", cfg, train_cfg, artifacts)

    trainer = Trainer(cfg, train_cfg)
    reports = trainer.train(
        progress=(lambda r: print(f"episode {r.episode}: reward {r.total_reward:.4g} "
                                  f"steps {r.steps}"))
        if args.verbose else None)
    _write_csv(os.path.join(args.out, "episodes.csv"), EPISODE_FIELDS,
               [dataclasses.asdict(r) for r in reports])
    qnet.save_checkpoint(trainer.eval_params, cfg.grid_k,
                         os.path.join(args.out, "checkpoint.bin"))
    return EXIT_OK


def cmd_eval(args):
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if not _prepare_outdir(args.out):
        return EXIT_BAD_OUTDIR
    try:
        params, _ = qnet.load_checkpoint(args.checkpoint, expect_grid_k=cfg.grid_k)
    except qnet.CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE_MISMATCH

    _write_manifest(args.out, "eval", cfg, None,
                    ["trajectory.csv", "summary.json"])
    ep_report, trajectory = evaluate(params, cfg, ep_id=args.episode)
    _write_csv(os.path.join(args.out, "trajectory.csv"), TRAJECTORY_FIELDS, trajectory)
    summary = dataclasses.asdict(ep_report)
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_inspect_obs(args):
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if not _prepare_outdir(args.out):
        return EXIT_BAD_OUTDIR

    _write_manifest(args.out, "inspect-obs", cfg, None, [])
    world = spawn_world(cfg)
    samples = ch.draw_samples(world, cfg)
    policy_rng = world.rng["agent"]
    for slot in range(args.slots):
        obs = build_observation(world, samples, cfg)
        for name, matrix in (("t1", obs.t1), ("t2", obs.t2), ("t3", obs.t3)):
            path = os.path.join(args.out, f"obs_slot{slot:04d}_{name}.csv")
            np.savetxt(path, matrix.T[::-1], delimiter=",")  # row 0 = north edge
        if world.done:
            break
        action = int(policy_rng.integers(env.N_ACTIONS))
        out = env.step(world, action, cfg)
        samples = out.samples
    return EXIT_OK


def cmd_report(args):
    produced = []
    episodes_csv = os.path.join(args.run_dir, "episodes.csv")
    trajectory_csv = os.path.join(args.run_dir, "trajectory.csv")
    grid_k = None
    manifest_path = os.path.join(args.run_dir, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            grid_k = json.load(fh).get("config", {}).get("grid_k")
    if os.path.exists(episodes_csv):
        produced.append(report.plot_training(
            episodes_csv, os.path.join(args.run_dir, "training.png")))
    if os.path.exists(trajectory_csv):
        produced.append(report.plot_trajectory(
            trajectory_csv, os.path.join(args.run_dir, "trajectory.png"), grid_k))
    if not produced:
        print(f"error: no episodes.csv or trajectory.csv under {args.run_dir!r}",
              file=sys.stderr)
        return EXIT_BAD_OUTDIR
    for path in produced:
        print(path)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="uavtp",
                                     description="UAV trajectory-planning simulator and DQN trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML scenario config")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default="runs/out", help="output directory")
        p.add_argument("--trend-mode", choices=["expectation", "stochastic"], default=None)
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="scenario config override, repeatable")

    p_train = sub.add_parser("train", help="train the planner")
    common(p_train)
    p_train.add_argument("--episodes", type=int, default=10)
    p_train.add_argument("--gu-growth", action="store_true",
                         help="add one ground user per episode")
    p_train.add_argument("--online-interval", type=int, default=1)
    p_train.add_argument("--offline-updates", type=int, default=200)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--sync-interval", type=int, default=500)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--offline-capacity", type=int, default=50_000)
    p_train.add_argument("--online-capacity", type=int, default=2_000)
    p_train.add_argument("--pool-limit", type=int, default=None)
    p_train.add_argument("--verbose", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="greedy rollout from a checkpoint")
    common(p_eval)
    p_eval.add_argument("checkpoint", help="checkpoint file from train")
    p_eval.add_argument("--episode", type=int, default=0,
                        help="episode id controlling the rollout world seed")
    p_eval.set_defaults(func=cmd_eval)

    p_obs = sub.add_parser("inspect-obs", help="dump observation channels as CSV")
    common(p_obs)
    p_obs.add_argument("--slots", type=int, default=1)
    p_obs.set_defaults(func=cmd_inspect_obs)

    p_rep = sub.add_parser("report", help="render figures from run artifacts")
    p_rep.add_argument("run_dir", help="directory holding episodes.csv/trajectory.csv")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
