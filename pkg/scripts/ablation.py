"""Matched-rate ablation (scalar, scalar+AC, LVQ, LVQ+AC) over the synthetic corpus.

Repeats the acceptance ablation at several target rates and companding
windows, reporting win counts, sign-test p-values and geometric-mean MSE
ratios against scalar quantization.

    python scripts/ablation.py --targets 1.5,2,3,4 --windows 31,255
"""

import argparse
import csv
from dataclasses import replace
from functools import partial

import numpy as np

from lvqkit.experiments import ablate_image, default_ablation_config, parallel_map, sign_test
from lvqkit.lattice import LatticeSpec
from lvqkit.synthetic import synthetic_corpus


def run(job, base, target):
    i, img = job
    return ablate_image(img, base, target_bpp=target, name=f"img{i:02d}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=20)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--targets", default="3")
    ap.add_argument("--windows", default="255")
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    images = list(enumerate(synthetic_corpus(args.images, args.seed, args.size, args.size)))
    out = []
    for window in map(int, args.windows.split(",")):
        base = default_ablation_config()
        base = replace(base, window=window,
                       lattice=LatticeSpec("diamond", args.dim, base.lattice.stride))
        for target in map(float, args.targets.split(",")):
            groups = parallel_map(partial(run, base=base, target=target), images)
            labels = [r.config for r in groups[0]]
            mse = np.array([[r.mse for r in g] for g in groups])
            print(f"window {window}, target {target} bpp:")
            for k, label in enumerate(labels[1:], 1):
                wins = int(np.sum(mse[:, k] < mse[:, 0]))
                ratio = float(np.exp(np.mean(np.log(mse[:, k] / mse[:, 0]))))
                print(f"  {label:>10} < scalar on {wins}/{len(groups)}, "
                      f"p={sign_test(wins, len(groups)):.1e}, MSE ratio {ratio:.3f}")
            for g in groups:
                out += [(window, target, r.image, r.config, r.stride, r.bpp, r.mse) for r in g]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window", "target_bpp", "image", "config", "stride", "bpp", "mse"])
            w.writerows(out)


if __name__ == "__main__":
    main()
