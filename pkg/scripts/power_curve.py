"""Size-corrected power of the Var test along an amplitude grid, optionally after de-correlation.

Useful for looking for non-monotone power under dependence, e.g.

    python3 scripts/power_curve.py --dep sma:1:0.2 --decorrelate full --amplitudes 0 0.25 0.5 1 1.5 2 4
"""

import argparse

from blocktest.montecarlo import ExperimentConfig, emit_report, size_corrected_power


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--dep", default="sma:1:0.2")
    ap.add_argument("--surface", default="a2")
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--decorrelate", choices=["none", "full", "separable"], default="full")
    ap.add_argument("--repair", choices=["modchol", "floor"], default="modchol")
    ap.add_argument("--test", choices=["gmd", "var"], default="var")
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    amps = sorted(set(args.amplitudes) | {0.0})
    config = ExperimentConfig(
        n_values=[args.n], master_seed=args.seed, reps=args.reps, tests=[args.test], dep=[args.dep],
        surfaces=[args.surface], amplitudes=amps, decorrelate=args.decorrelate, repair=args.repair,
        size_corrected=True, workers=args.workers,
    )
    print(emit_report(size_corrected_power(config), "text"), end="")


if __name__ == "__main__":
    main()
