"""Batch harness: policies x speeds x runs, per-run artifacts and per-cell medians."""
from __future__ import annotations

import csv
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .arena import Arena, arena_from_json, arena_to_json, build_arena, randomize_layout
from .config import ConfigError, dump_json, load_json, validate
from .policy import PolicyKind, PolicyParams
from .scoring import in_area_distance
from .vehicle import SERIES, EpisodeOptions, ErrorModel, EventKind, LoopTimings, RunRecord, \
    default_start, run_episode

METRICS = ("distance", "time_outside_pct", "crashes", "gate_passes")


@dataclass
class ExperimentConfig:
    arena: str | dict | None = None
    policies: tuple[str, ...] = ("BASELINE", "POLICY1", "POLICY2")
    speeds: tuple[float, ...] = (1.0, 1.5, 2.0)
    runs_per_config: int = 10
    episode_seconds: float = 300.0
    seed: int = 0
    drift: dict | None = None  # error model document; None means perfect odometry
    perception_noise: float = 0.0
    alpha: float = 0.3
    policy: dict = field(default_factory=dict)
    write_traces: bool = False
    out_dir: str = "runs"

    def __post_init__(self):
        if self.runs_per_config < 1:
            raise ConfigError("runs_per_config must be >= 1")
        if any(not v > 0 for v in self.speeds):
            raise ConfigError("speeds must be > 0")
        self.policies = tuple(PolicyKind(p).value for p in self.policies)
        self.speeds = tuple(float(v) for v in self.speeds)

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        validate(doc, "experiment")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(load_json(path))

    def to_json(self) -> dict:
        d = asdict(self)
        d["policies"] = list(self.policies)
        d["speeds"] = list(self.speeds)
        return d

    def base_arena(self) -> Arena:
        if self.arena is None:
            return build_arena()
        doc = load_json(self.arena) if isinstance(self.arena, str) else self.arena
        return arena_from_json(doc)

    def error_model(self) -> ErrorModel:
        return ErrorModel.from_json(self.drift) if self.drift is not None else ErrorModel.zero()

    def policy_params(self, kind: str, speed: float) -> PolicyParams:
        extra = {k: v for k, v in self.policy.items() if k not in ("kind", "v_target")}
        try:
            return PolicyParams(kind=PolicyKind(kind), v_target=speed, **extra)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"policy overrides: {e}") from None


@dataclass
class BatchSummary:
    runs: list[dict]
    cells: list[dict]
    config: dict

    def cell(self, policy: str, speed: float) -> dict:
        for c in self.cells:
            if c["policy"] == policy and c["speed"] == speed:
                return c
        raise KeyError((policy, speed))


def _seed_int(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def layout_for_run(base: Arena, seed: int, run: int) -> Arena:
    """Initial obstacle layout of run ``run``; the same for every (policy, speed) cell."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, run]))
    start = default_start(base)
    return randomize_layout(base, rng, keep_clear=[start[:2]])


def run_metrics(rec: RunRecord, arena: Arena) -> dict:
    x, y = rec.x[1:], rec.y[1:]
    h = arena.mission_half
    outside = (np.abs(x) > h) | (np.abs(y) > h)
    return {
        "distance": in_area_distance(rec, arena),
        "path_length": float(np.hypot(np.diff(rec.x), np.diff(rec.y)).sum()),
        "time_outside_pct": 100.0 * float(outside.mean()) if len(outside) else 0.0,
        "crashes": rec.count(EventKind.WALL_CONTACT) + rec.count(EventKind.OBSTACLE_CONTACT),
        "gate_passes": rec.count(EventKind.GATE_PASS),
        "area_exits": rec.count(EventKind.AREA_EXIT),
        "obstacle_moves": rec.count(EventKind.OBSTACLE_MOVED),
        "wp_visits": rec.count(EventKind.WP_VISIT),
    }


def trace_csv(rec: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES)
    cols = [rec.series[k].tolist() for k in SERIES]
    w.writerows(zip(*cols))
    return buf.getvalue()


def events_csv(rec: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "kind", "detail"))
    for e in rec.events:
        w.writerow((e.t, e.kind.value, e.detail))
    return buf.getvalue()


def run_name(policy: str, speed: float, run: int) -> str:
    return f"{policy.lower()}_v{speed:g}_r{run:02d}"


def _job(args):
    cfg, ci, kind, speed, r, out = args
    base = cfg.base_arena()
    arena = layout_for_run(base, cfg.seed, r)
    timings = LoopTimings(episode_length=cfg.episode_seconds)
    opts = EpisodeOptions(alpha=cfg.alpha, noise_sigma=cfg.perception_noise,
                          world_seed=_seed_int(cfg.seed, 2, r))
    seed = _seed_int(cfg.seed, 3, ci, r)
    rec = run_episode(arena, cfg.policy_params(kind, speed), cfg.error_model(), timings, seed, opts)
    row = {"policy": kind, "speed": speed, "run": r, "seed": seed, **run_metrics(rec, arena)}
    if out is not None:
        name = run_name(kind, speed, r)
        (out / "events" / f"{name}.csv").write_text(events_csv(rec))
        if cfg.write_traces:
            (out / "traces" / f"{name}.csv").write_text(trace_csv(rec))
    return row


def median_rows(runs: list[dict], cfg: ExperimentConfig) -> list[dict]:
    cells = []
    for kind in cfg.policies:
        for speed in cfg.speeds:
            rows = [r for r in runs if r["policy"] == kind and r["speed"] == speed]
            cell = {"policy": kind, "speed": speed, "n": len(rows)}
            for m in METRICS:
                cell[f"median_{m}"] = statistics.median(r[m] for r in rows)
            cells.append(cell)
    return cells


def _write_table(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    path.write_text(buf.getvalue())


def run_batch(cfg: ExperimentConfig, out_dir: str | Path | None = None, workers: int = 1
              ) -> BatchSummary:
    """Run every (policy, speed, run) episode and reduce to per-cell medians.

    Run ``r`` starts from the same obstacle layout and obstacle-move stream in
    every cell; the policy and drift streams depend on the cell as well.
    With ``out_dir`` set, per-run events (and traces) plus ``runs.csv``,
    ``summary.csv`` and ``summary.json`` are written there.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "events").mkdir(parents=True, exist_ok=True)
        if cfg.write_traces:
            (out / "traces").mkdir(parents=True, exist_ok=True)
    cfg.base_arena()  # fail early on a bad layout
    jobs = []
    for ci, (kind, speed) in enumerate((k, v) for k in cfg.policies for v in cfg.speeds):
        for r in range(cfg.runs_per_config):
            jobs.append((cfg, ci, kind, speed, r, out))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            runs = list(ex.map(_job, jobs))
    else:
        runs = [_job(j) for j in jobs]
    cells = median_rows(runs, cfg)
    summary = BatchSummary(runs, cells, cfg.to_json())
    if out is not None:
        _write_table(out / "runs.csv", runs)
        _write_table(out / "summary.csv", cells)
        doc = {"config": summary.config, "cells": cells,
               "arena": arena_to_json(cfg.base_arena())}
        (out / "summary.json").write_text(dump_json(doc))
    return summary

