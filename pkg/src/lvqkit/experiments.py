"""Matched-rate comparisons shared by the CLI, scripts and acceptance tests."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .codec import CodecConfig, Companding, Transform, evaluate, match_rate
from .lattice import LatticeKind, LatticeSpec

__all__ = [
    "ABLATION_CONFIGS",
    "AblationRow",
    "default_ablation_config",
    "worker_count",
    "parallel_map",
    "ablate_image",
    "sign_test",
    "paired_increase_pvalue",
]

# label -> (lattice kind, companding)
ABLATION_CONFIGS = {
    "scalar": (LatticeKind.INTEGER, Companding.OFF),
    "scalar+AC": (LatticeKind.INTEGER, Companding.ADAPTIVE),
    "LVQ": (LatticeKind.DIAMOND, Companding.OFF),
    "LVQ+AC": (LatticeKind.DIAMOND, Companding.ADAPTIVE),
}


def default_ablation_config(stride: float = 0.1) -> CodecConfig:
    """Identity transform on 4x4 cells (16 channels), diamond blocks of 4."""
    return CodecConfig(
        transform=Transform.IDENTITY,
        lattice=LatticeSpec(LatticeKind.DIAMOND, 4, stride),
        companding=Companding.OFF,
        window=255,
        downsample=4,
    )


def worker_count() -> int:
    cap = os.environ.get("LVQKIT_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Order-preserving map over a process pool (inline when one worker)."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class AblationRow:
    image: str
    config: str
    stride: float
    bpp: float
    mse: float
    psnr: float
    target_bpp: float
    delta_mse: float


def ablate_image(img, base: CodecConfig, target_bpp: float | None = None, name: str = "",
                 tol: float = 0.01, configs=ABLATION_CONFIGS) -> list:
    """All ablation configurations of one image at a common rate.

    The target rate is the scalar configuration's bpp at ``base``'s stride
    unless ``target_bpp`` is given.  ``mse`` is the log-MSE interpolated to
    the target between the final bisection brackets.
    """
    if target_bpp is None:
        scalar = replace(base, lattice=LatticeSpec(LatticeKind.INTEGER, base.lattice.dimension,
                                                   base.lattice.stride),
                         companding=Companding.OFF)
        target_bpp = evaluate(img, scalar)[0]
    rows = []
    for label, (kind, comp) in configs.items():
        cfg = replace(base, lattice=LatticeSpec(kind, base.lattice.dimension, base.lattice.stride),
                      companding=comp)
        m = match_rate(img, cfg, target_bpp, tol=tol)
        mse = m.mse_at_target
        psnr = math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)
        rows.append(AblationRow(name, label, m.stride, m.bpp, mse, psnr, target_bpp, 0.0))
    ref = rows[0].mse
    return [replace(r, delta_mse=r.mse - ref) for r in rows]


def sign_test(wins: int, n: int) -> float:
    """One-sided sign-test p-value for at least ``wins`` successes in ``n`` pairs."""
    return float(stats.binomtest(wins, n, 0.5, alternative="greater").pvalue)


def paired_increase_pvalue(treated, control) -> float:
    """One-sided Wilcoxon signed-rank p-value for ``treated > control``."""
    d = np.asarray(treated, dtype=float) - np.asarray(control, dtype=float)
    if np.all(d == 0):
        return 1.0
    return float(stats.wilcoxon(d, alternative="greater").pvalue)
