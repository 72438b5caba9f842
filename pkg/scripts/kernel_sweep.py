"""Kernel-size comparison on the VPO scenarios.

Runs RCKF and RCKS with (sigma, eta) in {(2, 2), (20, 2), (20, 20)} next to
CKF and CKS and prints a TRMSE table per scenario.

Usage: python3 scripts/kernel_sweep.py --trials 100 --seed 1
"""

import argparse

from robust_cubature.benchmark import EstimatorConfig, run_experiment
from robust_cubature.scenarios import vpo_scenario

SCENARIOS = {"S1": (0.0, 0.0), "S2": (0.0, 0.2), "S3": (0.2, 0.2)}
KERNELS = ((2.0, 2.0), (20.0, 2.0), (20.0, 20.0))


def estimators():
    out = [EstimatorConfig("ckf"), EstimatorConfig("cks")]
    for i, (s, e) in enumerate(KERNELS, start=1):
        out.append(EstimatorConfig("rckf", sigma=s, eta=e, label=f"RCKF{i}"))
        out.append(EstimatorConfig("rcks", sigma=s, eta=e, label=f"RCKS{i}"))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--scenarios", default="S1,S2,S3")
    args = ap.parse_args()

    for name in args.scenarios.split(","):
        rep = run_experiment(vpo_scenario(*SCENARIOS[name]), estimators(), args.trials, args.seed, args.workers)
        print(f"== {name} ({rep.used_trials}/{rep.trials} trials used) ==")
        print(f"{'estimator':<10} {'trmse_x1':>10} {'trmse_x2':>10} {'iters':>8}")
        for est, vals in rep.trmse.items():
            it = rep.mean_iterations.get(est)
            its = f"{it:8.2f}" if it is not None else f"{'-':>8}"
            print(f"{est:<10} {vals[0]:10.4f} {vals[1]:10.4f} {its}")


if __name__ == "__main__":
    main()
