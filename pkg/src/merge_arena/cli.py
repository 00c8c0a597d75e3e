"""Command-line front end.

Subcommands: ``train`` (single runs and exploration-decay sweeps),
``evaluate`` (collision-table grids from checkpoints), ``oracle``
(feasibility tables), ``select-best`` (checkpoint selection over summary
files), ``export-curves`` (per-learner training-curve CSVs).

Every command takes ``--seed``; when the flag is absent the MERGE_ARENA_SEED
environment variable is the fallback. ``--jobs`` parallelism applies to
evaluation cells and sweep runs only.
"""

import argparse
import configparser
import csv
import glob
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from multiprocessing import get_context

from . import __version__, oracle
from .checkpoint import load_actor
from .config import DEFAULT_EPISODES, SWEEP_DECAYS, TrainConfig, load_config
from .evaluation import (
    TestGrid,
    dominance_violations,
    load_summaries,
    oracle_overlay,
    run_test_grid,
    select_best,
    table_summary,
    write_cells_csv,
    write_oracle_csvs,
    write_pivot_csvs,
)
from .training import train

ENV_SEED = "MERGE_ARENA_SEED"


def _env_seed():
    raw = os.environ.get(ENV_SEED)
    return int(raw) if raw else None


def _float_list(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fail(msg, code=1):
    print(msg, file=sys.stderr)
    return code


def _config_sets_seed(path) -> bool:
    parser = configparser.ConfigParser()
    parser.read(path)
    return parser.has_section("train") and "seed" in parser["train"]


def _build_train_config(args):
    if args.config is not None:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
        config_seed = _config_sets_seed(args.config)
    else:
        cfg = TrainConfig()
        config_seed = False

    changes = {}
    if args.variant is not None:
        variant = args.variant.replace("-", "_")
        if variant != cfg.variant:
            changes["variant"] = variant
            # an episode count that was itself the old variant default follows
            # the variant; an explicit count survives the switch
            if (args.episodes is None
                    and cfg.total_episodes == DEFAULT_EPISODES[cfg.variant]):
                changes["total_episodes"] = 0
    if args.episodes is not None:
        changes["total_episodes"] = args.episodes
    if args.decay is not None:
        changes["hyper"] = replace(cfg.hyper, noise_decay=args.decay)

    if args.seed is not None:
        changes["seed"] = args.seed
    elif not config_seed and _env_seed() is not None:
        changes["seed"] = _env_seed()

    return replace(cfg, **changes) if changes else cfg


def _annotate_manifest(manifest_path, command, started, ended):
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest.update({
        "code_version": __version__,
        "command": command,
        "started_at": started,
        "ended_at": ended,
    })
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_one_training(task):
    cfg, out_dir, eval_summaries = task
    started = _now()
    result = train(cfg, out_dir, eval_summaries=eval_summaries)
    _annotate_manifest(result.manifest_path, "train", started, _now())
    return cfg.hyper.noise_decay, out_dir, result.status_counts


def cmd_train(args) -> int:
    try:
        cfg = _build_train_config(args)
    except FileNotFoundError as e:
        return _fail(str(e), code=2)
    except (ValueError, configparser.Error) as e:
        return _fail(f"invalid config: {e}", code=2)

    out_dir = args.out or os.path.join("runs", f"{cfg.variant}_seed{cfg.seed}")

    if args.sweep_decay:
        tasks = []
        for decay in SWEEP_DECAYS:
            swept = replace(cfg, hyper=replace(cfg.hyper, noise_decay=decay))
            sub = os.path.join(out_dir, f"decay_{decay:g}")
            tasks.append((swept, sub, args.eval_summaries))
        if args.jobs > 1:
            with get_context().Pool(processes=min(args.jobs, len(tasks))) as pool:
                results = pool.map(_run_one_training, tasks)
        else:
            results = [_run_one_training(t) for t in tasks]
        for decay, sub, counts in results:
            print(f"decay {decay:g}: {sub} {counts}")
        return 0

    decay, run_dir, counts = _run_one_training((cfg, out_dir, args.eval_summaries))
    print(f"trained {cfg.total_episodes} episodes (decay {decay:g}) -> {run_dir}")
    print(f"episode outcomes: {counts}")
    return 0


def cmd_evaluate(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    try:
        _, meta = load_actor(args.merge_ckpt)
    except FileNotFoundError:
        return _fail(f"checkpoint not found: {args.merge_ckpt}", code=2)
    except ValueError as e:
        return _fail(str(e))

    mixture = args.policy == "mixture"
    policies = ("constant", "random", "reactive") if mixture else (args.policy,)
    if "reactive" in policies and args.traffic_ckpt is None:
        return _fail("reactive traffic requires a traffic checkpoint")

    grid_kw = {}
    if args.ramps:
        grid_kw["ramp_lengths"] = _float_list(args.ramps)
    if args.diffs:
        grid_kw["start_differentials"] = _float_list(args.diffs)
    grid = TestGrid(
        variant=meta.variant,
        gaps=_float_list(args.gaps) if args.gaps else None,
        policies=policies,
        episodes_per_cell_per_policy=args.episodes_per_cell,
        **grid_kw,
    )
    try:
        table = run_test_grid(args.merge_ckpt, args.traffic_ckpt, grid,
                              seed_root=(seed,), jobs=args.jobs)
    except (ValueError, FileNotFoundError) as e:
        return _fail(str(e))

    os.makedirs(args.out, exist_ok=True)
    summary = table_summary(table)
    summary.update({
        "variant": meta.variant,
        "merge_checkpoint": os.path.basename(args.merge_ckpt),
        "traffic_checkpoint": (os.path.basename(args.traffic_ckpt)
                               if args.traffic_ckpt else None),
        "episode": meta.episode,
        "seed": seed,
        "gaps": list(grid.gaps),
    })

    overlay = None
    violations = []
    if args.oracle:
        overlay = oracle_overlay(grid)
        violations = dominance_violations(table, overlay)
        summary["oracle_avoidable_cells"] = sum(overlay.values())
        summary["oracle_cells"] = len(overlay)
        summary["dominance_violations"] = [list(k) for k in violations]
        write_oracle_csvs(overlay, grid, args.out)

    write_cells_csv(table, os.path.join(args.out, "cells.csv"),
                    include_mixture=mixture, overlay=overlay)
    write_pivot_csvs(table, args.out, include_mixture=mixture)
    summary_path = os.path.join(args.out, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"{summary['collisions']} collisions / {summary['episodes']} episodes "
          f"({summary['collision_pct']:.2f}%) -> {args.out}")
    if violations:
        print(f"dominance violations (collision-free yet oracle-unavoidable): "
              f"{violations}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle(args) -> int:
    variant = args.variant.replace("-", "_")
    grid = TestGrid(
        variant=variant,
        ramp_lengths=_float_list(args.ramps) if args.ramps
        else TestGrid(variant=variant).ramp_lengths,
        start_differentials=_float_list(args.diffs) if args.diffs
        else TestGrid(variant=variant).start_differentials,
        gaps=_float_list(args.gaps) if args.gaps else None,
        policies=("constant",),
    )
    res = oracle.FINE if args.resolution == "fine" else oracle.COARSE
    table = oracle_overlay(grid, res=res, constant_traffic=args.constant_traffic)

    os.makedirs(args.out, exist_ok=True)
    write_oracle_csvs(table, grid, args.out)
    oracle.save_table(
        os.path.join(args.out, "oracle.json"), table,
        meta={"resolution": res.name, "constant_traffic": args.constant_traffic,
              "initial_speed": grid.initial_speed,
              "vehicle_length": grid.vehicle_length,
              "tiv_stream": grid.tiv_test})

    n_avoid = sum(table.values())
    print(f"avoidable {n_avoid}/{len(table)} cells -> {args.out}")
    violations = oracle.monotonicity_violations(table)
    if violations:
        print(f"monotonicity violations: {violations}", file=sys.stderr)
        return 1
    return 0


def cmd_select_best(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.summary_dir, "summary_*.json")))
    if not paths:
        return _fail(f"no checkpoint summaries in {args.summary_dir}")
    summaries = load_summaries(paths)
    best = select_best(summaries)
    chosen = next(s for s in summaries if s["episode"] == best)
    print(f"selected checkpoint episode {best} by {args.metric}")
    print(f"  collisions={chosen['collisions']} "
          f"bias={chosen.get('bias', 0.0):.4f} "
          f"avg_decel={chosen.get('avg_decel', 0.0):.4f} "
          f"avg_accel={chosen.get('avg_accel', 0.0):.4f}")

    if args.emit_plot_data:
        cols = ["episode", "collisions", "successes", "timeouts",
                "collision_pct", "avg_accel", "avg_decel", "accel_count",
                "decel_count", "bias"]
        path = os.path.join(args.summary_dir, "checkpoint_metrics.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for s in summaries:
                w.writerow([s.get(c, "") for c in cols])
        print(f"  metrics -> {path}")
    return 0


def cmd_export_curves(args) -> int:
    src = os.path.join(args.run_dir, "curves.csv")
    if not os.path.exists(src):
        return _fail(f"curve log not found: {src}", code=2)
    out_dir = args.out or args.run_dir
    os.makedirs(out_dir, exist_ok=True)
    with open(src, newline="") as fh:
        rows = list(csv.DictReader(fh))
    written = []
    for learner in ("merge", "traffic"):
        series = [r for r in rows if r["learner"] == learner]
        if not series:
            continue
        path = os.path.join(out_dir, f"curves_{learner}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "reward", "cum_avg", "moving_mean"])
            for r in series:
                w.writerow([r["episode"], r["reward"], r["cum_avg"],
                            r["moving_mean"]])
        written.append(path)
    print("wrote " + ", ".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="merge-arena",
        description="On-ramp merge self-play training and collision-table "
                    "evaluation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run training (optionally a decay sweep)")
    t.add_argument("--config", help="INI config file; flags override its values")
    t.add_argument("--variant", choices=["three_vehicle", "three-vehicle",
                                         "full_scene", "full-scene"])
    t.add_argument("--episodes", type=int)
    t.add_argument("--decay", type=float, help="exploration noise decay per step")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", help="output directory (default runs/<variant>_seed<seed>)")
    t.add_argument("--sweep-decay", action="store_true",
                   help=f"one run per decay in {SWEEP_DECAYS}")
    t.add_argument("--jobs", type=int, default=1,
                   help="parallel sweep runs (sweep mode only)")
    t.add_argument("--eval-summaries", action="store_true",
                   help="run the standard test after every checkpoint save")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("evaluate", help="collision-table grid from checkpoints")
    e.add_argument("merge_ckpt")
    e.add_argument("traffic_ckpt", nargs="?", default=None)
    e.add_argument("--gaps", help="comma-separated gap list, e.g. 5,15,25")
    e.add_argument("--ramps", help="comma-separated ramp lengths")
    e.add_argument("--diffs", help="comma-separated start differentials")
    e.add_argument("--policy", default="mixture",
                   choices=["constant", "random", "reactive", "mixture"])
    e.add_argument("--episodes-per-cell", type=int, default=34)
    e.add_argument("--oracle", action="store_true",
                   help="add the feasibility overlay and dominance check")
    e.add_argument("--seed", type=int)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out", default="eval")
    e.set_defaults(fn=cmd_evaluate)

    o = sub.add_parser("oracle", help="ideal-action feasibility table")
    o.add_argument("--variant", default="three_vehicle",
                   choices=["three_vehicle", "three-vehicle",
                            "full_scene", "full-scene"])
    o.add_argument("--ramps", help="comma-separated ramp lengths")
    o.add_argument("--diffs", help="comma-separated start differentials")
    o.add_argument("--gaps", help="comma-separated gaps")
    o.add_argument("--resolution", default="coarse", choices=["coarse", "fine"])
    o.add_argument("--constant-traffic", action="store_true",
                   help="pin traffic at steady speed instead of ideal joint action")
    o.add_argument("--seed", type=int)  # accepted for interface uniformity
    o.add_argument("--out", default="oracle_out")
    o.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("select-best", help="pick a checkpoint from summaries")
    s.add_argument("summary_dir")
    s.add_argument("--metric", default="collisions", choices=["collisions"])
    s.add_argument("--emit-plot-data", action="store_true",
                   help="write per-checkpoint multi-metric CSV")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_select_best)

    x = sub.add_parser("export-curves", help="split curve log per learner")
    x.add_argument("run_dir")
    x.add_argument("--out")
    x.add_argument("--seed", type=int)
    x.set_defaults(fn=cmd_export_curves)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
