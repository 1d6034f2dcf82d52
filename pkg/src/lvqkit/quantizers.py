"""Hard and soft quantization of h x w x c feature maps.

Quantization is done per spatial location: every location carries one
c-vector and, for the diamond lattice, one codebook flag shared by all of its
channels.  When the lattice dimension n is smaller than c the channels are
split into contiguous n-blocks; the single flag is still chosen on the squared
error of the whole c-vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatchError, DomainError, ParameterError
from .lattice import LatticeKind, LatticeSpec, generator_matrix, nearest_points, round_half_away

__all__ = [
    "FeatureMap",
    "QuantizedMap",
    "SoftQuantConfig",
    "as_feature_map",
    "quantize_scalar",
    "quantize_lvq",
    "dequantize",
    "quantize_soft",
    "soft_jacobian",
    "noise_proxy",
]


@dataclass
class FeatureMap:
    data: np.ndarray

    def __post_init__(self):
        # C order keeps reductions over channels independent of how the data was produced
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DimensionMismatchError(f"feature map must be h x w x c, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("feature map contains non-finite values")

    @property
    def shape(self):
        return self.data.shape

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def c(self) -> int:
        return self.data.shape[2]


@dataclass
class QuantizedMap:
    indices: np.ndarray
    coset_flags: np.ndarray
    spec: LatticeSpec

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.coset_flags = np.asarray(self.coset_flags, dtype=np.uint8)
        if self.indices.ndim != 3 or self.coset_flags.shape != self.indices.shape[:2]:
            raise DimensionMismatchError(
                f"indices {self.indices.shape} and flags {self.coset_flags.shape} disagree"
            )
        if self.indices.shape[2] % self.spec.dimension:
            raise DimensionMismatchError(
                f"{self.indices.shape[2]} channels not divisible by lattice dimension "
                f"{self.spec.dimension}"
            )

    @property
    def shape(self):
        return self.indices.shape

    def __eq__(self, other):
        if not isinstance(other, QuantizedMap):
            return NotImplemented
        return (
            self.spec == other.spec
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.coset_flags, other.coset_flags)
        )


@dataclass(frozen=True)
class SoftQuantConfig:
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")


def as_feature_map(y) -> FeatureMap:
    return y if isinstance(y, FeatureMap) else FeatureMap(y)


def quantize_scalar(y, stride: float) -> QuantizedMap:
    """Uniform scalar rounding ``round(y / stride)``, halves away from zero."""
    y = as_feature_map(y)
    spec = LatticeSpec(LatticeKind.INTEGER, 1, stride)
    idx = round_half_away(y.data / spec.stride).astype(np.int64)
    return QuantizedMap(idx, np.zeros(y.shape[:2], dtype=np.uint8), spec)


def _check_grouping(y: FeatureMap, spec: LatticeSpec):
    if y.c % spec.dimension:
        raise DimensionMismatchError(
            f"{y.c} channels not divisible by lattice dimension {spec.dimension}"
        )


def _coset_candidates(v: np.ndarray, stride: float):
    """Both coset roundings of location vectors ``v`` (rows)."""
    u = v / stride
    k0 = round_half_away(u)
    k1 = round_half_away(u - 0.5)
    return k0, k1, k0 * stride, (k1 + 0.5) * stride


def quantize_lvq(y, spec: LatticeSpec, base_coset_only: bool = False) -> QuantizedMap:
    """Lattice quantization of every location vector.

    For the diamond lattice both coset roundings are computed and the one
    with the smaller squared error over the location's c channels is kept
    (ties go to the base coset).  ``base_coset_only`` disables the shifted
    codebook, which reduces the quantizer to scalar rounding.
    """
    y = as_feature_map(y)
    _check_grouping(y, spec)
    h, w, c = y.shape
    v = y.data.reshape(h * w, c)
    flags = np.zeros(h * w, dtype=np.uint8)
    if spec.kind is LatticeKind.HEXAGONAL:
        idx, _, _ = nearest_points(spec, v.reshape(-1, 2))
        return QuantizedMap(idx.reshape(h, w, c), flags.reshape(h, w), spec)
    if spec.kind is LatticeKind.INTEGER or base_coset_only:
        idx = round_half_away(v / spec.stride)
        return QuantizedMap(idx.reshape(h, w, c).astype(np.int64), flags.reshape(h, w), spec)
    k0, k1, q0, q1 = _coset_candidates(v, spec.stride)
    e0 = np.sum((v - q0) ** 2, axis=1)
    e1 = np.sum((v - q1) ** 2, axis=1)
    pick = e1 < e0
    flags[pick] = 1
    idx = np.where(pick[:, None], k1, k0).astype(np.int64)
    return QuantizedMap(idx.reshape(h, w, c), flags.reshape(h, w), spec)


def dequantize(q: QuantizedMap) -> FeatureMap:
    h, w, c = q.shape
    spec = q.spec
    if spec.kind is LatticeKind.HEXAGONAL:
        if q.coset_flags.any():
            raise ParameterError("coset flags are only defined for the diamond lattice")
        pts = q.indices.reshape(-1, 2).astype(float) @ generator_matrix(spec)
        return FeatureMap(pts.reshape(h, w, c))
    if spec.kind is LatticeKind.INTEGER and q.coset_flags.any():
        raise ParameterError("coset flags are only defined for the diamond lattice")
    shift = 0.5 * q.coset_flags.astype(float)[:, :, None]
    return FeatureMap((q.indices + shift) * spec.stride)


def _soft_parts(v: np.ndarray, spec: LatticeSpec, sigma: float):
    _, _, q0, q1 = _coset_candidates(v, spec.stride)
    d0 = np.sqrt(np.sum((v - q0) ** 2, axis=1))
    d1 = np.sqrt(np.sum((v - q1) ** 2, axis=1))
    # softmax of (-sigma*d0, -sigma*d1), first component
    phi_a = expit(sigma * (d1 - d0))
    return q0, q1, d0, d1, phi_a


def quantize_soft(y, spec: LatticeSpec, cfg: SoftQuantConfig) -> FeatureMap:
    """Softmax-weighted mix of the two coset roundings of each location.

    Weights are ``softmax(-sigma * [|z - z1|, |z - z2|])`` using unsquared
    Euclidean distances over the location's c channels.
    """
    y = as_feature_map(y)
    if spec.kind is not LatticeKind.DIAMOND:
        raise ParameterError("soft quantization is defined for the diamond lattice")
    _check_grouping(y, spec)
    if not np.isfinite(cfg.sigma):
        raise ParameterError("sigma must be finite")
    h, w, c = y.shape
    v = y.data.reshape(h * w, c)
    q0, q1, _, _, phi_a = _soft_parts(v, spec, cfg.sigma)
    out = phi_a[:, None] * q0 + (1.0 - phi_a)[:, None] * q1
    return FeatureMap(out.reshape(h, w, c))


def soft_jacobian(z, spec: LatticeSpec, sigma: float) -> np.ndarray:
    """Analytic Jacobian of :func:`quantize_soft` for one location vector.

    The two roundings are piecewise constant, so only the softmax weights
    depend on ``z``.  Undefined where ``z`` sits on a codeword (zero distance).
    """
    z = np.asarray(z, dtype=float)[None, :]
    q0, q1, d0, d1, phi_a = _soft_parts(z, spec, sigma)
    if d0[0] == 0 or d1[0] == 0:
        raise DomainError("soft quantizer is not differentiable at a codeword")
    pa = phi_a[0]
    grad_phi_a = -sigma * pa * (1 - pa) * ((z - q0)[0] / d0[0] - (z - q1)[0] / d1[0])
    return np.outer(q0[0] - q1[0], grad_phi_a)


def noise_proxy(y, stride: float, seed: int = 0) -> FeatureMap:
    """``y + u`` with ``u`` i.i.d. uniform on the open interval (-stride/2, stride/2)."""
    y = as_feature_map(y)
    if not stride > 0:
        raise ParameterError(f"stride must be positive, got {stride}")
    rng = np.random.default_rng(seed)
    u = rng.random(y.shape)
    while True:
        bad = u == 0.0
        if not bad.any():
            break
        u[bad] = rng.random(int(bad.sum()))
    return FeatureMap(y.data + (u - 0.5) * stride)
