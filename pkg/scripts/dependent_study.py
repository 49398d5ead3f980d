"""Size and raw power of the Var test for SMA(1) and SAR fields after de-correlation."""

import argparse

from blocktest.montecarlo import ExperimentConfig, emit_report, run_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--rho", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3])
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.0, 2.0])
    ap.add_argument("--decorrelate", choices=["full", "separable"], default="full")
    ap.add_argument("--repair", choices=["modchol", "floor"], default="modchol")
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--format", choices=["csv", "text"], default="text")
    args = ap.parse_args()
    dep = [f"sma:1:{r}" for r in args.rho] + [f"sar:{r}" for r in args.rho if r > 0]
    config = ExperimentConfig(
        n_values=args.n, master_seed=args.seed, reps=args.reps, tests=["var"], dep=dep,
        surfaces=["a1", "a2", "a3", "a4"], amplitudes=sorted(set(args.amplitudes) | {0.0}),
        decorrelate=args.decorrelate, repair=args.repair, workers=args.workers,
    )
    print(emit_report(run_report(config), args.format), end="")


if __name__ == "__main__":
    main()
