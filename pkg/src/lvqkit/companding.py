"""A-law companding and a spatially adaptive per-location parameter field.

Each spatial location j gets a scale ``A_j >= 1`` and a normalization
``s_j > 0``.  Forward companding maps ``y_j / s_j`` (clamped to [-1, 1])
through the A-law curve; the inverse applies the inverse curve and
multiplies by ``s_j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import DimensionMismatchError, DomainError, ParameterError
from .lattice import LatticeKind, LatticeSpec
from .quantizers import FeatureMap, as_feature_map, dequantize, quantize_lvq

__all__ = [
    "A_CANDIDATES",
    "NORM_EPS",
    "CompandingField",
    "alaw_forward",
    "alaw_inverse",
    "alaw_slope",
    "estimate_field",
    "compand_map",
    "inverse_compand_map",
    "quantize_norm_scale",
    "dequantize_norm_scale",
]

A_CANDIDATES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 87.6)
NORM_EPS = 1e-6
# norm_scale is sent as a 16-bit code of log2(s) in steps of 1/LOG_STEPS
LOG_STEPS = 1024
LOG_OFFSET = 32768


def _check_a(a):
    a = np.asarray(a, dtype=float)
    if not np.all(a >= 1):
        raise ParameterError("A-law parameter must be >= 1")
    return a


def alaw_forward(x, a):
    """A-law compressor on [-1, 1]; odd, increasing, F(+-1) = +-1."""
    x = np.asarray(x, dtype=float)
    a = _check_a(a)
    if np.any(np.abs(x) > 1):
        raise DomainError("A-law input must satisfy |x| <= 1")
    ax = np.abs(x)
    denom = 1.0 + np.log(a)
    t = a * ax
    with np.errstate(divide="ignore"):
        log_branch = (1.0 + np.log(np.maximum(t, 1.0))) / denom
    out = np.where(t < 1.0, t / denom, log_branch)
    out = np.copysign(out, x)
    return out if out.ndim else float(out)


def alaw_inverse(y, a):
    """Inverse of :func:`alaw_forward`."""
    y = np.asarray(y, dtype=float)
    a = _check_a(a)
    if np.any(np.abs(y) > 1):
        raise DomainError("A-law input must satisfy |y| <= 1")
    ay = np.abs(y)
    denom = 1.0 + np.log(a)
    v = ay * denom
    out = np.where(v < 1.0, v / a, np.exp(np.minimum(v, denom) - 1.0) / a)
    out = np.copysign(out, y)
    return out if out.ndim else float(out)


def alaw_slope(x, a):
    """Derivative of :func:`alaw_forward` (right derivative at |x| = 1/A)."""
    x = np.abs(np.asarray(x, dtype=float))
    a = _check_a(a)
    denom = 1.0 + np.log(a)
    with np.errstate(divide="ignore"):
        out = np.where(a * x < 1.0, a / denom, 1.0 / (np.maximum(x, 1e-300) * denom))
    return out if out.ndim else float(out)


def quantize_norm_scale(s) -> np.ndarray:
    """16-bit code of log2(s), rounded up so the decoded scale never shrinks."""
    s = np.maximum(np.asarray(s, dtype=float), NORM_EPS)
    code = np.ceil(np.log2(s) * LOG_STEPS - 1e-9) + LOG_OFFSET
    return np.clip(code, 0, 65535).astype(np.int64)


def dequantize_norm_scale(code) -> np.ndarray:
    return np.exp2((np.asarray(code, dtype=float) - LOG_OFFSET) / LOG_STEPS)


@dataclass
class CompandingField:
    a_values: np.ndarray
    norm_scale: np.ndarray

    def __post_init__(self):
        self.a_values = np.asarray(self.a_values, dtype=float)
        self.norm_scale = np.asarray(self.norm_scale, dtype=float)
        if self.a_values.ndim != 2 or self.a_values.shape != self.norm_scale.shape:
            raise DimensionMismatchError("a_values and norm_scale must share an h x w shape")
        if not np.all(self.a_values >= 1):
            raise ParameterError("a_values must be >= 1")
        if not np.all(self.norm_scale > 0):
            raise ParameterError("norm_scale must be > 0")

    @property
    def shape(self):
        return self.a_values.shape

    @classmethod
    def identity(cls, h: int, w: int) -> "CompandingField":
        return cls(np.ones((h, w)), np.ones((h, w)))

    def a_codes(self) -> np.ndarray:
        """Index of each A value in :data:`A_CANDIDATES`."""
        cand = np.asarray(A_CANDIDATES)
        codes = np.argmin(np.abs(self.a_values[..., None] - cand), axis=-1)
        if not np.allclose(cand[codes], self.a_values, rtol=0, atol=1e-12):
            raise ParameterError("a_values outside the candidate set cannot be serialized")
        return codes

    def quantized(self) -> "CompandingField":
        """Field exactly as a decoder reconstructs it from the bitstream."""
        s = dequantize_norm_scale(quantize_norm_scale(self.norm_scale))
        return CompandingField(np.asarray(A_CANDIDATES)[self.a_codes()], s)


def _check_field(y: FeatureMap, field: CompandingField):
    if field.shape != y.shape[:2]:
        raise DimensionMismatchError(
            f"field shape {field.shape} does not match feature map {y.shape[:2]}"
        )


def _normalized(y: FeatureMap, field: CompandingField):
    x = y.data / field.norm_scale[:, :, None]
    clipped = np.clip(x, -1.0, 1.0)
    return clipped, int(np.count_nonzero(clipped != x))


def compand_map(y, field: CompandingField, return_saturation: bool = False):
    y = as_feature_map(y)
    _check_field(y, field)
    x, saturated = _normalized(y, field)
    out = FeatureMap(alaw_forward(x, field.a_values[:, :, None]))
    return (out, saturated) if return_saturation else out


def inverse_compand_map(y_hat, field: CompandingField, return_saturation: bool = False):
    """Inverse A-law then rescale; quantized values beyond +-1 are clamped first."""
    y_hat = as_feature_map(y_hat)
    _check_field(y_hat, field)
    x = np.clip(y_hat.data, -1.0, 1.0)
    saturated = int(np.count_nonzero(x != y_hat.data))
    out = alaw_inverse(x, field.a_values[:, :, None]) * field.norm_scale[:, :, None]
    out = FeatureMap(out)
    return (out, saturated) if return_saturation else out


def estimate_field(
    y,
    window: int = 3,
    stride: float = 0.05,
    lattice: LatticeSpec | None = None,
    candidates=A_CANDIDATES,
) -> CompandingField:
    """Deterministic stand-in for a learned per-location A-law predictor.

    ``norm_scale`` is the max |y| over a window x window spatial neighbourhood
    (all channels, truncated at the borders, floored at NORM_EPS) and is
    snapped up to its 16-bit code.  Each location then takes the candidate A
    whose compand-quantize-expand round trip at ``stride`` (with ``lattice``,
    scalar rounding by default) gives the lowest squared error; ties keep the
    smaller A.
    """
    y = as_feature_map(y)
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be an odd integer >= 1, got {window}")
    h, w, c = y.shape
    size = (min(window, 2 * h - 1), min(window, 2 * w - 1))
    local_max = maximum_filter(np.abs(y.data).max(axis=2), size=size, mode="nearest")
    norm = dequantize_norm_scale(quantize_norm_scale(np.maximum(local_max, NORM_EPS)))
    if lattice is None:
        lattice = LatticeSpec(LatticeKind.INTEGER, 1, stride)
    else:
        lattice = lattice.with_stride(stride)
    best_err = np.full((h, w), np.inf)
    best_a = np.ones((h, w))
    for a in candidates:
        field = CompandingField(np.full((h, w), float(a)), norm)
        rec = inverse_compand_map(dequantize(quantize_lvq(compand_map(y, field), lattice)), field)
        err = np.sum((rec.data - y.data) ** 2, axis=2)
        better = err < best_err
        best_err = np.where(better, err, best_err)
        best_a = np.where(better, float(a), best_a)
    return CompandingField(best_a, norm)
