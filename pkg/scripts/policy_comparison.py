"""Run the policy x speed batch and print per-cell medians as a table.

    python scripts/policy_comparison.py --runs 10 --out runs/comparison
"""
import argparse
from pathlib import Path

from nanorace.experiment import ExperimentConfig, run_batch
from nanorace.vehicle import ErrorModel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--seconds", type=float, default=300.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--drift", action="store_true", help="use the default drift model")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/comparison"))
    args = ap.parse_args()

    cfg = ExperimentConfig(runs_per_config=args.runs, episode_seconds=args.seconds,
                           seed=args.seed, drift=ErrorModel().to_json() if args.drift else None)
    summary = run_batch(cfg, args.out, workers=args.workers)

    print(f"{'policy':<9} {'v':>4} {'dist m':>8} {'out %':>6} {'crash':>5} {'gates':>5}")
    for c in summary.cells:
        print(f"{c['policy']:<9} {c['speed']:>4g} {c['median_distance']:>8.1f} "
              f"{c['median_time_outside_pct']:>6.1f} {c['median_crashes']:>5g} "
              f"{c['median_gate_passes']:>5g}")
    print(f"per-run rows in {args.out / 'runs.csv'}")


if __name__ == "__main__":
    main()
