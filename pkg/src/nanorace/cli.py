"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 bad configuration, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .analysis import Trajectory, margin_study, nominal_square_trajectory
from .arena import GeometryError, arena_from_json, arena_to_json, build_arena
from .augment import AugParams, augment, resize_gray
from .config import ConfigError, dump_json, load_json
from .dataset import CSV_COLUMNS, DatasetPlan, sample_dataset_poses
from .experiment import ExperimentConfig, events_csv, run_batch, run_metrics, trace_csv
from .perception import (SensorGeometry, depth_from_millimetres, label_from_rasters,
                         sector_labels, sector_soft_probs)
from .pgm import read_pgm, write_pgm
from .policy import PolicyKind, PolicyParams
from .scoring import COMP_MULTIPLIERS, ENV_MULTIPLIERS, ScoreError, ScoreInput, \
    count_gate_passes_xy, in_area_distance_xy, score
from .vehicle import EpisodeOptions, ErrorModel, LoopTimings, run_episode

EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 2, 3, 4

log = logging.getLogger("nanorace")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--config", type=Path, default=None, help="JSON parameter document")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="nanorace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", parents=[common], help="simulate one episode")
    p.add_argument("--policy", choices=[k.value for k in PolicyKind], default="POLICY2")
    p.add_argument("--speed", type=float, default=1.5)
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--arena", type=Path, default=None, help="arena layout JSON")

    p = sub.add_parser("batch", parents=[common], help="policy x speed x run experiment")
    p.add_argument("--runs", type=int, default=None, help="override runs_per_config")
    p.add_argument("--seconds", type=float, default=None, help="override episode_seconds")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo safety-margin study")
    p.add_argument("--nominal", type=Path, default=None, help="CSV with t,x,y,yaw columns")
    p.add_argument("--half", type=float, default=3.0)
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--laps", type=int, default=8)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("-n", "--realizations", type=int, default=1024)
    p.add_argument("--metric", choices=["linf", "l2"], default="linf")
    p.add_argument("--dump", type=int, default=0, help="write the first K corrupted trajectories")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("score", parents=[common], help="competition score")
    p.add_argument("--dist", type=float, default=None, help="in-area distance, m")
    p.add_argument("--gates", type=int, default=0)
    p.add_argument("--trajectory", type=Path, default=None, help="CSV with x,y columns")
    p.add_argument("--arena", type=Path, default=None)
    p.add_argument("--env", type=int, choices=ENV_MULTIPLIERS, default=1)
    p.add_argument("--comp", type=int, choices=COMP_MULTIPLIERS, default=1)
    p.add_argument("--json", action="store_true", help="print the breakdown as JSON")

    p = sub.add_parser("label", parents=[common], help="sector labels from rasters or an arena pose")
    p.add_argument("--depth", type=Path, help="16-bit depth PGM in millimetres")
    p.add_argument("--seg", type=Path, help="8-bit segmentation PGM of surface codes")
    p.add_argument("--arena", type=Path, default=None)
    p.add_argument("--pose", type=float, nargs=3, metavar=("X", "Y", "YAW"))
    p.add_argument("--ground-aware", action="store_true")

    p = sub.add_parser("augment", parents=[common], help="photometric augmentation of PGM frames")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--resize", type=int, nargs=2, metavar=("W", "H"), default=None)

    p = sub.add_parser("poses", parents=[common], help="dataset collection poses")
    p.add_argument("--arena", type=Path, default=None)

    sub.add_parser("dump-defaults", parents=[common], help="write every default config")
    return ap


def parse_cli(argv=None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


# --------------------------------------------------------------------------
# helpers


def _out(args, default: str = ".") -> Path:
    out = args.out or Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _arena(path):
    return arena_from_json(load_json(path)) if path else build_arena()


def _read_csv_columns(path: Path, names) -> dict[str, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    missing = [n for n in names if rows and n not in rows[0]]
    if not rows or missing:
        raise ConfigError(f"{path}: need columns {list(names)}")
    return {n: np.array([float(r[n]) for r in rows]) for n in names}


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    arena = _arena(args.arena) if args.arena else cfg.base_arena()
    params = cfg.policy_params(args.policy, args.speed)
    timings = LoopTimings(episode_length=args.seconds or cfg.episode_seconds)
    opts = EpisodeOptions(alpha=cfg.alpha, noise_sigma=cfg.perception_noise)
    seed = args.seed if args.seed is not None else cfg.seed
    rec = run_episode(arena, params, cfg.error_model(), timings, seed, opts)
    metrics = run_metrics(rec, arena)
    if args.out:
        out = _out(args)
        (out / "trace.csv").write_text(trace_csv(rec))
        (out / "events.csv").write_text(events_csv(rec))
        (out / "summary.json").write_text(dump_json({"seed": seed, "policy": args.policy,
                                                      "speed": args.speed, **metrics}))
    print(dump_json(metrics), end="")
    return 0


def cmd_batch(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.runs is not None:
        cfg.runs_per_config = args.runs
    if args.seconds is not None:
        cfg.episode_seconds = args.seconds
    cfg.__post_init__()  # re-check the overridden fields
    out = _out(args, cfg.out_dir)
    summary = run_batch(cfg, out, workers=args.workers)
    for c in summary.cells:
        log.info("%s v=%g: median distance %.1f m, outside %.1f %%", c["policy"], c["speed"],
                 c["median_distance"], c["median_time_outside_pct"])
    print(out / "summary.json")
    return 0


def cmd_mc(args) -> int:
    model = ErrorModel.from_json(load_json(args.config)) if args.config else ErrorModel()
    if args.nominal:
        c = _read_csv_columns(args.nominal, ("t", "x", "y", "yaw"))
        nominal = Trajectory(c["t"], c["x"], c["y"], c["yaw"])
    else:
        nominal = nominal_square_trajectory(args.half, args.speed, args.laps, args.dt)
    stats = margin_study(nominal, model, args.realizations, args.seed or 0, metric=args.metric,
                         keep=args.dump, workers=args.workers)
    out = _out(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["realization", "margin"] + [f"time_outside_{t:g}" for t in stats.thresholds]
               + [f"crossings_{t:g}" for t in stats.thresholds])
    for i, m in enumerate(stats.margins):
        w.writerow([i, float(m)] + [float(stats.time_outside(t)[i]) for t in stats.thresholds]
                   + [int(stats.crossings(t)[i]) for t in stats.thresholds])
    (out / "margins.csv").write_text(buf.getvalue())
    doc = {"model": model.to_json(), "n": args.realizations, "seed": args.seed or 0,
           "metric": args.metric, "stats": stats.summary()}
    (out / "stats.json").write_text(dump_json(doc))
    for i, tr in enumerate(stats.trajectories):
        np.savetxt(out / f"realization_{i:04d}.csv", tr.as_array(), delimiter=",",
                   header="t,x,y,yaw", comments="", fmt="%.17g")
    print(dump_json(doc["stats"]), end="")
    return 0


def cmd_score(args) -> int:
    if args.trajectory is not None:
        arena = _arena(args.arena)
        c = _read_csv_columns(args.trajectory, ("x", "y"))
        dist = float(in_area_distance_xy(c["x"], c["y"], arena.mission_half))
        gates = int(count_gate_passes_xy(c["x"], c["y"], arena))
    elif args.dist is not None:
        dist, gates = args.dist, args.gates
    else:
        raise _Usage("score needs --dist or --trajectory")
    s = ScoreInput(dist, gates, args.env, args.comp)
    pts = score(s)
    if args.json or args.trajectory is not None:
        print(dump_json({"dist": dist, "gates": gates, "env": args.env, "comp": args.comp,
                         "score": pts}), end="")
    else:
        print(_fmt_number(pts))
    return 0


def cmd_label(args) -> int:
    geom = SensorGeometry()
    if args.depth and args.seg:
        depth = depth_from_millimetres(read_pgm(args.depth.read_bytes()))
        seg = read_pgm(args.seg.read_bytes())
        labels = label_from_rasters(depth, seg, geom, args.ground_aware)
        doc = {"labels": list(labels)}
    elif args.pose:
        arena = _arena(args.arena)
        pose = tuple(args.pose)
        doc = {"labels": list(sector_labels(arena, pose, geom, args.ground_aware)),
               "probs": list(sector_soft_probs(arena, pose, geom, args.ground_aware))}
    else:
        raise _Usage("label needs --depth and --seg, or --pose")
    print(dump_json(doc), end="")
    return 0


def cmd_augment(args) -> int:
    params = AugParams.from_json(load_json(args.config)) if args.config else AugParams()
    out = _out(args, "augmented")
    seed = args.seed or 0
    for i, path in enumerate(args.inputs):
        img = read_pgm(path.read_bytes())
        if img.dtype != np.uint8:
            raise ConfigError(f"{path}: augmentation needs an 8-bit image")
        if args.resize:
            img = resize_gray(img, *args.resize)
        # per-file stream, independent of how many files ride along
        file_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        (out / path.name).write_bytes(write_pgm(augment(img, params, file_seed)))
    return 0


def cmd_poses(args) -> int:
    plan = DatasetPlan.from_json(load_json(args.config)) if args.config else DatasetPlan()
    arena = _arena(args.arena)
    poses = sample_dataset_poses(arena, plan, args.seed or 0)
    out = _out(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in poses:
        w.writerow([getattr(p, c) for c in CSV_COLUMNS])
    (out / "poses.csv").write_text(buf.getvalue())
    print(f"{len(poses)} poses -> {out / 'poses.csv'}")
    return 0


def cmd_dump_defaults(args) -> int:
    params = asdict(PolicyParams())
    params["kind"] = params["kind"].value
    docs = {
        "experiment.json": ExperimentConfig().to_json(),
        "arena.json": arena_to_json(build_arena()),
        "error_model.json": ErrorModel().to_json(),
        "policy.json": params,
        "augment.json": AugParams().to_json(),
        "dataset_plan.json": {**asdict(DatasetPlan()), "splits": list(DatasetPlan().splits),
                              "height_range": list(DatasetPlan().height_range)},
    }
    if args.out is None:
        print(dump_json(docs), end="")
        return 0
    out = _out(args)
    for name, doc in docs.items():
        (out / name).write_text(dump_json(doc))
    return 0


class _Usage(Exception):
    pass


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "mc": cmd_mc, "score": cmd_score,
            "label": cmd_label, "augment": cmd_augment, "poses": cmd_poses,
            "dump-defaults": cmd_dump_defaults}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Usage as e:
        parser.print_usage(sys.stderr)
        print(f"nanorace: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ScoreError, GeometryError, json.JSONDecodeError) as e:
        print(f"nanorace: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - top-level boundary
        log.info("traceback", exc_info=True)
        print(f"nanorace: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
