"""Van der Pol benchmark: CKF, RCKF, CKS and RCKS on scenarios S1-S3.

Usage: python3 scripts/run_vpo.py --trials 100 --seed 1 --out results/vpo
"""

import argparse
import json
from pathlib import Path

from robust_cubature.benchmark import default_estimators, run_experiment
from robust_cubature.scenarios import vpo_scenario

SCENARIOS = {"S1": (0.0, 0.0), "S2": (0.0, 0.2), "S3": (0.2, 0.2)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--eta", type=float, default=2.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    ests = default_estimators(args.sigma, args.eta)
    for name in SCENARIOS:
        rep = run_experiment(vpo_scenario(*SCENARIOS[name]), ests, args.trials, args.seed, args.workers)
        print(f"== {name} ==")
        print(rep.to_text())
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{name}.json").write_text(json.dumps(rep.to_dict(include_timing=True), indent=2))


if __name__ == "__main__":
    main()
