"""Synthetic tile-scan rehearsal: shift some tiles of a 144 x 125 field and scan it.

Each shifted tile gets one block-sized patch of height ``--height`` (in noise
standard deviations) at a random block slot. Prints the tile map and the
confusion counts.
"""

import argparse

import numpy as np

from blocktest.fieldgen import DependenceSpec, NoiseSpec, gen_dependent
from blocktest.grid import make_partition
from blocktest.io import scan_grid, tile_map


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shifted", type=int, default=18)
    ap.add_argument("--height", type=float, default=3.0)
    ap.add_argument("--rho", type=float, default=0.0, help="SMA(1) dependence of the noise")
    ap.add_argument("--decorrelate", choices=["none", "full", "separable"], default="separable")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rows, cols = 6, 5
    rng = np.random.default_rng(args.seed)
    dep = DependenceSpec.sma(1, args.rho) if args.rho else DependenceSpec()
    g = gen_dependent(144, 125, dep, NoiseSpec("normal"), rng=rng)
    g /= g.std()
    th, tw = 144 // rows, 125 // cols
    p = make_partition(th, tw)
    shifted = set(int(k) for k in rng.choice(rows * cols, args.shifted, replace=False))
    for k in shifted:
        r0, c0 = (k // cols) * th, (k % cols) * tw
        bi, bj = rng.integers(p.b_n), rng.integers(p.b_m)
        g[r0 + bi * p.l_n : r0 + (bi + 1) * p.l_n, c0 + bj * p.l_m : c0 + (bj + 1) * p.l_m] += args.height
    decor = None if args.decorrelate == "none" else args.decorrelate
    tiles = scan_grid(g, rows, cols, "var", decor)
    print(tile_map(tiles, rows, cols), end="")
    rejected = {t.index for t in tiles if t.reject}
    print(f"shifted tiles rejected: {len(rejected & shifted)}/{len(shifted)}")
    print(f"null tiles rejected: {len(rejected - shifted)}/{rows * cols - len(shifted)}")


if __name__ == "__main__":
    main()
