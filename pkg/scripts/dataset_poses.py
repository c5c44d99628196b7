"""Sample the dataset collection poses and report group/split counts."""
import argparse
import csv
from collections import Counter
from pathlib import Path

from nanorace.arena import build_arena
from nanorace.dataset import CSV_COLUMNS, DatasetPlan, sample_dataset_poses


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("poses.csv"))
    args = ap.parse_args()

    arena = build_arena()
    poses = sample_dataset_poses(arena, DatasetPlan(), args.seed)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        w.writerows([getattr(p, c) for c in CSV_COLUMNS] for p in poses)

    counts = Counter((p.group, p.split) for p in poses)
    for g in (1, 2, 3):
        row = "  ".join(f"{s}={counts[g, s]}" for s in ("train", "val", "test"))
        print(f"group {g}: {row}")
    h = arena.outer_half
    outside = sum(abs(p.x) > h or abs(p.y) > h for p in poses)
    print(f"{len(poses)} poses -> {args.out} ({outside} beyond the outer walls)")


if __name__ == "__main__":
    main()
