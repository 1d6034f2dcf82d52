"""Monte Carlo normalized second moments of the implemented lattices.

    python scripts/lattice_table.py --samples 1000000 --csv results/lattice_table.csv
"""

import argparse
import csv
import math
import time

from lvqkit.lattice import LatticeSpec, estimate_second_moment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dims", default="2,3,4,5,6,8")
    ap.add_argument("--csv")
    args = ap.parse_args()

    specs = [LatticeSpec("a2", 2)]
    for n in map(int, args.dims.split(",")):
        specs += [LatticeSpec("z", n), LatticeSpec("diamond", n)]
    rows = []
    print(f"{'lattice':>8} {'n':>3} {'G':>10} {'std err':>9} {'gain vs Z (dB)':>15}")
    for spec in specs:
        t0 = time.perf_counter()
        g = estimate_second_moment(spec, args.samples, args.seed)
        gain = 10 * math.log10((1 / 12) / g.g_value)
        rows.append((spec.kind.value, spec.dimension, g.g_value, g.std_error, gain,
                     time.perf_counter() - t0))
        print(f"{spec.kind.value:>8} {spec.dimension:>3} {g.g_value:10.6f} {g.std_error:9.1e} "
              f"{gain:15.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lattice", "dim", "g", "std_error", "gain_db", "seconds"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
