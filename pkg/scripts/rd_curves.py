"""Rate-distortion curves of scalar and diamond quantization over the synthetic corpus.

Writes one CSV row per (image, lattice, stride); plot MSE or PSNR against bpp.

    python scripts/rd_curves.py --images 4 --transform dct8 --csv results/rd_dct8.csv
"""

import argparse
import csv

import numpy as np

from lvqkit.codec import CodecConfig, Companding, Transform, rd_sweep
from lvqkit.experiments import parallel_map
from lvqkit.lattice import LatticeSpec
from lvqkit.synthetic import synthetic_corpus


def sweep(job):
    name, img, cfg, strides = job
    return name, cfg, rd_sweep(img, cfg, strides, [0.0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=4)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--transform", choices=["identity", "dct8"], default="dct8")
    ap.add_argument("--downsample", type=int, default=4)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--strides", default="0.02,0.03,0.05,0.08,0.12,0.2,0.3")
    ap.add_argument("--compand", action="store_true")
    ap.add_argument("--window", type=int, default=255)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    transform = Transform.DCT8 if args.transform == "dct8" else Transform.IDENTITY
    ds = 1 if transform is Transform.DCT8 else args.downsample
    strides = [float(s) for s in args.strides.split(",")]
    comp = Companding.ADAPTIVE if args.compand else Companding.OFF
    jobs = []
    for i, img in enumerate(synthetic_corpus(args.images, args.seed, args.size, args.size)):
        for kind in ("z", "diamond"):
            cfg = CodecConfig(transform, LatticeSpec(kind, args.dim, strides[0]), comp,
                              args.window, 0.0, ds)
            jobs.append((f"img{i:02d}", img, cfg, strides))
    rows = []
    for name, cfg, points in parallel_map(sweep, jobs):
        for p in points:
            rows.append((name, cfg.lattice.kind.value, p.stride, p.bpp, p.distortion, p.psnr))
    rows.sort()
    for kind in ("z", "diamond"):
        sel = [r for r in rows if r[1] == kind]
        print(f"{kind:>8}: mean bpp {np.mean([r[3] for r in sel]):.3f}, "
              f"mean PSNR {np.mean([r[5] for r in sel]):.2f} dB over {len(sel)} points")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image", "lattice", "stride", "bpp", "mse", "psnr"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
