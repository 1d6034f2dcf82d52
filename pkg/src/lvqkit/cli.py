"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 config error, 4 stream error,
5 check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .codec import (
    DEFAULT_LAMBDAS,
    CodecConfig,
    Companding,
    Transform,
    compress,
    decode_image,
    distortion,
    rd_sweep,
)
from .entropy import Bitstream
from .errors import ConfigError, DecodeError, LVQError, ParameterError
from .experiments import ablate_image, parallel_map, sign_test
from .imageio import read_pnm, write_pnm
from .lattice import LatticeKind, LatticeSpec, estimate_second_moment
from .quantizers import soft_jacobian, quantize_soft, SoftQuantConfig
from .synthetic import synthetic_corpus

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_STREAM, EXIT_CHECK = 0, 2, 3, 4, 5

RD_COLUMNS = ["lattice", "stride", "bpp", "mse", "psnr", "lambda", "objective"]
STATS_COLUMNS = ["lattice", "dim", "samples", "seed", "g", "std_error"]
GRAD_COLUMNS = ["sigma", "points", "excluded", "max_rel_error"]
ABLATE_COLUMNS = ["image", "config", "stride", "bpp", "target_bpp", "mse", "psnr", "delta_mse"]

_TRANSFORMS = {"identity": Transform.IDENTITY, "dct8": Transform.DCT8}
_COMPAND = {"off": Companding.OFF, "adaptive": Companding.ADAPTIVE}


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _lattices(text: str) -> list:
    out = []
    for t in text.split(","):
        t = t.strip().lower()
        if t not in ("z", "a2", "diamond"):
            raise argparse.ArgumentTypeError(f"unknown lattice {t!r}")
        out.append(t)
    return out


def _manifest(args, timings=None, seed=None) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "csv")}
    m = {"command": args.command, "config": config, "seed": seed, "version": __version__}
    if timings is not None:
        m["timings"] = timings
    return m


def _write_csv(path, columns, rows, manifest):
    """CSV preceded by a '#'-comment manifest line (timings go to the JSON sidecar)."""
    deterministic = {k: v for k, v in manifest.items() if k != "timings"}
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# manifest: " + json.dumps(deterministic, sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(v) for v in r])
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")


def _fmt(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def _codec_config(args, kind=None) -> CodecConfig:
    spec = LatticeSpec(kind or args.lattice, args.dim, args.stride)
    return CodecConfig(
        transform=_TRANSFORMS[args.transform],
        lattice=spec,
        companding=_COMPAND[args.compand],
        window=args.window,
        lam=args.lam[0] if args.lam else 0.0,
        downsample=args.downsample,
    )


def cmd_encode(args) -> int:
    img = read_pnm(args.input)
    cfg = _codec_config(args)
    t0 = time.perf_counter()
    res = compress(img, cfg)
    timings = dict(res.timings)
    Path(args.output).write_bytes(res.stream.data)
    t1 = time.perf_counter()
    rec = decode_image(res.stream)
    timings["decode"] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0
    mse, psnr = distortion(img, rec)
    print(f"{args.output}: {len(res.stream.data)} bytes, {res.bpp:.4f} bpp, "
          f"MSE {mse:.3f}, PSNR {psnr:.2f} dB")
    print("sections: " + ", ".join(f"{k}={v}B" for k, v in res.section_bytes.items()))
    if res.saturated or res.clamped or rec.clipped:
        print(f"saturation: companding {res.saturated}, index clamp {res.clamped}, "
              f"pixel clip {rec.clipped}")
    print("timings: " + ", ".join(f"{k} {v * 1e3:.1f} ms" for k, v in timings.items()))
    return EXIT_OK


def cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    t0 = time.perf_counter()
    img = decode_image(Bitstream(data))
    write_pnm(args.output, img)
    print(f"{args.output}: {img.width}x{img.height}x{img.channels}, "
          f"decode {1e3 * (time.perf_counter() - t0):.1f} ms")
    return EXIT_OK


def _sweep_one(job):
    img, cfg, strides, lambdas, label = job
    return label, rd_sweep(img, cfg, strides, lambdas)


def cmd_rd_sweep(args) -> int:
    img = read_pnm(args.input)
    lambdas = args.lam or list(DEFAULT_LAMBDAS)
    t0 = time.perf_counter()
    jobs = []
    for kind in args.lattices:
        dim = 2 if kind == "a2" else args.dim
        spec = LatticeSpec(kind, dim, args.strides[0])
        cfg = CodecConfig(_TRANSFORMS[args.transform], spec, _COMPAND[args.compand],
                          args.window, 0.0, args.downsample)
        jobs.append((img, cfg, args.strides, lambdas, kind))
    rows = []
    for label, points in parallel_map(_sweep_one, jobs):
        for p in points:
            rows.append((label, p.stride, p.bpp, p.distortion, p.psnr, p.lam, p.objective))
    rows.sort(key=lambda r: (r[0], r[1], r[5]))
    timings = {"sweep": time.perf_counter() - t0}
    for r in rows:
        print(f"{r[0]:>8} stride={r[1]:<8g} bpp={r[2]:.4f} psnr={r[4]:.2f} "
              f"lambda={r[5]:<7g} objective={r[6]:.4f}")
    if args.csv:
        _write_csv(args.csv, RD_COLUMNS, rows, _manifest(args, timings))
    return EXIT_OK


def cmd_lattice_stats(args) -> int:
    dim = 2 if args.lattice == "a2" else args.dim
    spec = LatticeSpec(args.lattice, dim, 1.0)
    t0 = time.perf_counter()
    est = estimate_second_moment(spec, args.samples, args.seed)
    timings = {"estimate": time.perf_counter() - t0}
    print(f"G({args.lattice}, n={dim}) = {est.g_value:.6f} +- {est.std_error:.6f} "
          f"({est.sample_count} samples, seed {args.seed})")
    if args.csv:
        _write_csv(args.csv, STATS_COLUMNS,
                   [(args.lattice, dim, est.sample_count, args.seed, est.g_value, est.std_error)],
                   _manifest(args, timings, args.seed))
    return EXIT_OK


def gradcheck(sigmas, seed: int = 0, dim: int = 4, points: int = 100, step: float = 1e-5,
              margin: float = 1e-3):
    """Max relative error of the analytic soft-quantizer Jacobian against
    central differences, per sigma.  Points within ``margin`` of a rounding
    boundary of either coset, or of a codeword, are redrawn and counted."""
    spec = LatticeSpec(LatticeKind.DIAMOND, dim, 1.0)
    results = []
    for sigma in sigmas:
        rng = np.random.default_rng([seed, int(round(sigma * 1000))])
        worst, used, excluded = 0.0, 0, 0
        while used < points:
            z = rng.uniform(-3, 3, dim)
            frac0 = np.abs(z - np.floor(z) - 0.5)
            frac1 = np.abs(z - np.floor(z))
            frac1 = np.minimum(frac1, 1 - frac1)
            if frac0.min() < margin or frac1.min() < margin:
                excluded += 1
                continue
            used += 1
            ja = soft_jacobian(z, spec, sigma)
            jf = np.empty_like(ja)
            cfg = SoftQuantConfig(sigma)
            for j in range(dim):
                e = np.zeros(dim)
                e[j] = step
                fp = quantize_soft((z + e)[None, None, :], spec, cfg).data[0, 0]
                fm = quantize_soft((z - e)[None, None, :], spec, cfg).data[0, 0]
                jf[:, j] = (fp - fm) / (2 * step)
            scale = np.abs(jf).max()
            err = np.abs(ja - jf).max()
            rel = 0.0 if err == 0 else err / max(scale, 1e-12)
            worst = max(worst, float(rel))
        results.append((sigma, used, excluded, worst))
    return results


def cmd_gradcheck(args) -> int:
    t0 = time.perf_counter()
    results = gradcheck(args.sigma, args.seed, args.dim, args.points)
    timings = {"gradcheck": time.perf_counter() - t0}
    failed = False
    for sigma, used, excluded, worst in results:
        ok = worst <= 1e-3
        failed |= not ok
        print(f"sigma={sigma:<8g} points={used} excluded={excluded} "
              f"max_rel_error={worst:.3e} {'ok' if ok else 'FAIL'}")
    if args.csv:
        _write_csv(args.csv, GRAD_COLUMNS, results, _manifest(args, timings, args.seed))
    return EXIT_CHECK if failed else EXIT_OK


def _load_images(spec: str, seed: int, size: int):
    if spec.startswith("synthetic"):
        _, _, count = spec.partition(":")
        count = int(count) if count else 20
        return [(f"synthetic-{i:02d}", im)
                for i, im in enumerate(synthetic_corpus(count, seed, size, size))]
    path = Path(spec)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
        if not files:
            raise FileNotFoundError(f"no PGM/PPM files in {path}")
        return [(p.name, read_pnm(p)) for p in files]
    return [(path.name, read_pnm(path))]


def _ablate_one(job, base, target):
    name, img = job
    return ablate_image(img, base, target, name=name)


def cmd_ablate(args) -> int:
    images = _load_images(args.input, args.seed, args.size)
    base = CodecConfig(_TRANSFORMS[args.transform], LatticeSpec("diamond", args.dim, args.stride),
                       Companding.OFF, args.window, 0.0, args.downsample)
    t0 = time.perf_counter()
    per_image = parallel_map(partial(_ablate_one, base=base, target=args.target_bpp), images)
    timings = {"ablate": time.perf_counter() - t0}
    rows = [r for group in per_image for r in group]
    for r in rows:
        print(f"{r.image:>16} {r.config:>10} bpp={r.bpp:.4f} (target {r.target_bpp:.4f}) "
              f"mse={r.mse:.3f} psnr={r.psnr:.2f} delta={r.delta_mse:+.3f}")
    if len(per_image) > 1:
        ref = np.array([g[0].mse for g in per_image])
        for k, label in enumerate(r.config for r in per_image[0]):
            if k == 0:
                continue
            mse = np.array([g[k].mse for g in per_image])
            wins = int(np.sum(mse < ref))
            print(f"{label:>10} beats scalar on {wins}/{len(ref)} images, "
                  f"sign test p={sign_test(wins, len(ref)):.3g}")
    if args.csv:
        _write_csv(args.csv, ABLATE_COLUMNS,
                   [(r.image, r.config, r.stride, r.bpp, r.target_bpp, r.mse, r.psnr, r.delta_mse)
                    for r in rows],
                   _manifest(args, timings, args.seed))
    return EXIT_OK


def _add_codec_flags(p, stride=0.1, transform="dct8", window=255, downsample=1, dim=4,
                     lattice_list=False):
    if lattice_list:
        p.add_argument("--lattice", dest="lattices", type=_lattices, default=["z", "diamond"],
                       help="comma-separated lattice list (a2 always uses n=2)")
    else:
        p.add_argument("--lattice", choices=["z", "a2", "diamond"], default="diamond")
    p.add_argument("--dim", type=int, default=dim, help="lattice dimension n")
    p.add_argument("--stride", type=float, default=stride, help="quantizer stride")
    p.add_argument("--compand", choices=list(_COMPAND), default="off")
    p.add_argument("--window", type=int, default=window,
                   help="companding normalization window, in latent locations")
    p.add_argument("--transform", choices=list(_TRANSFORMS), default=transform)
    p.add_argument("--downsample", type=int, default=downsample,
                   help="identity transform: pixels per latent cell side")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvqkit",
        description="Lattice vector quantization with adaptive companding: codec and benchmarks.",
        epilog="Exit codes: 0 ok, 2 input error, 3 config error, 4 stream error, 5 check failure. "
               "LVQKIT_THREADS caps the worker count of sweeps and ablations.",
    )
    parser.add_argument("--version", action="version", version=f"lvqkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a PGM/PPM image")
    p.add_argument("input")
    p.add_argument("output")
    _add_codec_flags(p)
    p.add_argument("--lambda", dest="lam", type=_floats, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bitstream to PGM/PPM")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rd-sweep", help="rate-distortion sweep over strides and lattices",
                       description="CSV columns: " + ",".join(RD_COLUMNS))
    p.add_argument("input")
    _add_codec_flags(p, lattice_list=True)
    p.add_argument("--strides", type=_floats, default=[0.025, 0.05, 0.1, 0.2])
    p.add_argument("--lambda", dest="lam", type=_floats, default=None,
                   help="comma-separated lambda list (default: six-point grid)")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_rd_sweep)

    p = sub.add_parser("lattice-stats", help="Monte Carlo normalized second moment",
                       description="CSV columns: " + ",".join(STATS_COLUMNS))
    p.add_argument("--lattice", choices=["z", "a2", "diamond"], default="diamond")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_lattice_stats)

    p = sub.add_parser("gradcheck", help="soft quantizer Jacobian vs finite differences",
                       description="CSV columns: " + ",".join(GRAD_COLUMNS))
    p.add_argument("--sigma", type=_floats, default=[0.0, 1.0, 5.0, 20.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="scalar / scalar+AC / LVQ / LVQ+AC at matched rate",
                       description="INPUT is a PGM/PPM file, a directory of them, or "
                                   "'synthetic[:N]' for the bundled corpus. CSV columns: "
                                   + ",".join(ABLATE_COLUMNS))
    p.add_argument("input")
    p.add_argument("--csv")
    p.add_argument("--stride", type=float, default=0.1,
                   help="scalar stride defining the target rate")
    p.add_argument("--target-bpp", type=float, default=None)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--window", type=int, default=255)
    p.add_argument("--transform", choices=list(_TRANSFORMS), default="identity")
    p.add_argument("--downsample", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=128, help="synthetic image side")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    except DecodeError as exc:
        print(f"error: bad stream: {exc}", file=sys.stderr)
        return EXIT_STREAM
    except (ConfigError, ParameterError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LVQError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
