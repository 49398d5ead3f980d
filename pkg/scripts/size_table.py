"""Empirical size of both tests under independent noise, one row per (test, n, dist)."""

import argparse

from blocktest.montecarlo import ExperimentConfig, emit_report, simulate_size


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[10, 20, 50])
    ap.add_argument("--dist", nargs="+", default=["normal", "t3", "chisq2"])
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--format", choices=["csv", "text"], default="text")
    args = ap.parse_args()
    config = ExperimentConfig(
        n_values=args.n, master_seed=args.seed, reps=args.reps, noise=args.dist,
        amplitudes=[0.0], workers=args.workers,
    )
    print(emit_report(simulate_size(config), args.format), end="")


if __name__ == "__main__":
    main()
