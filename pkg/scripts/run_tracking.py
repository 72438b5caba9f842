"""Agile-target tracking benchmark: position and velocity RMSE of all four estimators.

Usage: python3 scripts/run_tracking.py --trials 100 --seed 1 --out results/tracking
"""

import argparse
import json
from pathlib import Path

from robust_cubature.benchmark import default_estimators, run_experiment
from robust_cubature.scenarios import tracking_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--eta", type=float, default=2.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    rep = run_experiment(tracking_scenario(), default_estimators(args.sigma, args.eta), args.trials, args.seed, args.workers)
    print(rep.to_text())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(json.dumps(rep.to_dict(include_timing=True), indent=2))
        (args.out / "rmse_series.csv").write_text(rep.to_csv())


if __name__ == "__main__":
    main()
