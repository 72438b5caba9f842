"""Measurement-contamination sweep on the VPO model.

Varies the measurement outlier ratio p2 with p1 fixed and reports the TRMSE
of every estimator at each level.

Usage: python3 scripts/contamination_sweep.py --p2 0,0.1,0.2,0.3 --trials 50
"""

import argparse

from robust_cubature.benchmark import default_estimators, run_experiment
from robust_cubature.scenarios import vpo_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p1", type=float, default=0.0)
    ap.add_argument("--p2", default="0,0.1,0.2,0.3")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--eta", type=float, default=2.0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    ests = default_estimators(args.sigma, args.eta)
    names = [e.name for e in ests]
    print(f"{'p2':>5} " + " ".join(f"{n + '_x1':>9} {n + '_x2':>9}" for n in names))
    for p2 in (float(v) for v in args.p2.split(",")):
        rep = run_experiment(vpo_scenario(args.p1, p2), ests, args.trials, args.seed, args.workers)
        cells = " ".join(f"{rep.trmse[n][0]:9.4f} {rep.trmse[n][1]:9.4f}" for n in names)
        print(f"{p2:5.2f} {cells}")


if __name__ == "__main__":
    main()
