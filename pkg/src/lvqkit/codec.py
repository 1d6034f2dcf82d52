"""Toy image codec: fixed transform -> (companding) -> lattice quantizer ->
adaptive range coding, plus R-D evaluation helpers.

Bitstream layout (little-endian)::

    "LVQ1" | version u8 | transform u8 | lattice kind u8 | n u8 | stride f32
    | H u32 | W u32 | channels u8 | companding u8 | window u8
    | field len u32 + bytes | flag len u32 + bytes | index len u32 + bytes
    | CRC32 of everything before it

The index section starts with the latent downsample factor (u8) and one
alphabet bound per channel (u8), followed by range-coded data.  Index tables
are kept per (codebook flag, channel).
"""

from __future__ import annotations

import enum
import math
import struct
import time
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .companding import (
    A_CANDIDATES,
    CompandingField,
    compand_map,
    dequantize_norm_scale,
    estimate_field,
    inverse_compand_map,
    quantize_norm_scale,
)
from .entropy import Bitstream, RangeDecoder, RangeEncoder, SymbolModel
from .errors import (
    ChecksumError,
    ConfigError,
    DecodeError,
    DimensionMismatchError,
    FormatError,
    LVQError,
    ParameterError,
    TruncatedStreamError,
)
from .imageio import ImageBuffer
from .lattice import LatticeKind, LatticeSpec
from .quantizers import FeatureMap, QuantizedMap, as_feature_map, dequantize, quantize_lvq

__all__ = [
    "DEFAULT_LAMBDAS",
    "Transform",
    "Companding",
    "CodecConfig",
    "RdPoint",
    "EncodeResult",
    "analyze",
    "synthesize",
    "encode_quantized",
    "decode_quantized",
    "compress",
    "encode_image",
    "decode_image",
    "distortion",
    "rd_sweep",
    "evaluate",
    "match_rate",
]

MAGIC = b"LVQ1"
VERSION = 1
DEFAULT_LAMBDAS = (0.0016, 0.0032, 0.0075, 0.015, 0.03, 0.045)

_HEADER = struct.Struct("<4sBBBBfIIBBB")
_U32 = struct.Struct("<I")
_KIND_CODES = {LatticeKind.INTEGER: 0, LatticeKind.HEXAGONAL: 1, LatticeKind.DIAMOND: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_INDEX_MIN, _INDEX_MAX = -(1 << 15), (1 << 15) - 1
_MAX_BOUND = 255
_DELTA_RANGE = 64


class Transform(enum.IntEnum):
    IDENTITY = 0
    DCT8 = 1


class Companding(enum.IntEnum):
    OFF = 0
    ADAPTIVE = 1


@dataclass(frozen=True)
class CodecConfig:
    transform: Transform = Transform.DCT8
    lattice: LatticeSpec = field(default_factory=lambda: LatticeSpec(LatticeKind.DIAMOND, 4, 0.05))
    companding: Companding = Companding.OFF
    window: int = 3
    lam: float = 0.0
    downsample: int = 1

    def __post_init__(self):
        object.__setattr__(self, "transform", Transform(self.transform))
        object.__setattr__(self, "companding", Companding(self.companding))
        if self.lam < 0:
            raise ParameterError("lambda must be >= 0")
        if int(self.downsample) != self.downsample or not 1 <= self.downsample <= 255:
            raise ParameterError("downsample must be an integer in [1, 255]")
        if self.transform is Transform.DCT8 and self.downsample != 1:
            raise ParameterError("downsample applies to the identity transform only")
        if not 1 <= self.window <= 255 or self.window % 2 == 0:
            raise ParameterError("window must be odd and in [1, 255]")
        if self.lattice.dimension > 255:
            raise ParameterError("lattice dimension must fit in one byte")

    def with_stride(self, stride: float) -> "CodecConfig":
        return replace(self, lattice=self.lattice.with_stride(stride))

    @property
    def block(self) -> int:
        return 8 if self.transform is Transform.DCT8 else self.downsample

    def check_image(self, height: int, width: int, channels: int):
        b = self.block
        if height % b or width % b:
            raise ConfigError(
                f"image {height}x{width} is not divisible by the {b}x{b} "
                f"{'DCT block' if self.transform is Transform.DCT8 else 'downsample cell'}"
            )
        c = b * b * channels
        if c % self.lattice.dimension:
            raise ConfigError(
                f"{c} latent channels are not divisible by lattice dimension "
                f"{self.lattice.dimension}"
            )


@dataclass(frozen=True)
class RdPoint:
    bpp: float
    distortion: float
    psnr: float
    objective: float
    lam: float
    stride: float = float("nan")


@dataclass
class EncodeResult:
    stream: Bitstream
    quantized: QuantizedMap
    field: CompandingField | None
    bpp: float
    saturated: int = 0
    clamped: int = 0
    timings: dict = field(default_factory=dict)
    section_bytes: dict = field(default_factory=dict)


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    return m


_DCT8 = _dct_matrix(8)


def analyze(img: ImageBuffer, cfg: CodecConfig) -> FeatureMap:
    """Pixels -> latent feature map.

    Pixels are centred and scaled as (p - 128) / 128.  The identity transform
    folds each downsample x downsample cell into channels; DCT8 takes an
    orthonormal 2-D DCT of each 8 x 8 block, giving 64 channels per colour
    plane, ordered (row frequency, column frequency, plane).
    """
    H, W, C = img.pixels.shape
    cfg.check_image(H, W, C)
    x = (img.pixels.astype(float) - 128.0) / 128.0
    b = cfg.block
    blocks = x.reshape(H // b, b, W // b, b, C).transpose(0, 2, 1, 3, 4)
    if cfg.transform is Transform.DCT8:
        blocks = np.einsum("ui,hwijc,vj->hwuvc", _DCT8, blocks, _DCT8)
    return FeatureMap(blocks.reshape(H // b, W // b, b * b * C))


def synthesize(y, cfg: CodecConfig) -> ImageBuffer:
    """Inverse of :func:`analyze`; out-of-range pixels are clipped and counted."""
    y = as_feature_map(y)
    h, w, c = y.shape
    b = cfg.block
    if c % (b * b):
        raise DimensionMismatchError(f"{c} channels do not fold into {b}x{b} cells")
    C = c // (b * b)
    blocks = y.data.reshape(h, w, b, b, C)
    if cfg.transform is Transform.DCT8:
        blocks = np.einsum("ui,hwuvc,vj->hwijc", _DCT8, blocks, _DCT8)
    x = blocks.transpose(0, 2, 1, 3, 4).reshape(h * b, w * b, C)
    px = np.rint(x * 128.0 + 128.0)
    clipped = int(np.count_nonzero((px < 0) | (px > 255)))
    return ImageBuffer(np.clip(px, 0, 255).astype(np.uint8), clipped=clipped)


# --- payload sections -------------------------------------------------------


def _encode_field(f: CompandingField) -> bytes:
    enc = RangeEncoder()
    a_model = SymbolModel(8)
    d_model = SymbolModel(2 * _DELTA_RANGE + 2)
    escape = 2 * _DELTA_RANGE + 1
    a_codes = f.a_codes().ravel()
    n_codes = quantize_norm_scale(f.norm_scale).ravel()
    prev = None
    for a, s in zip(a_codes.tolist(), n_codes.tolist()):
        enc.encode_symbol(a_model, a)
        if prev is None:
            enc.encode_uniform(s, 16)
        else:
            d = s - prev
            if -_DELTA_RANGE <= d <= _DELTA_RANGE:
                enc.encode_symbol(d_model, d + _DELTA_RANGE)
            else:
                enc.encode_symbol(d_model, escape)
                enc.encode_uniform(s, 16)
        prev = s
    return enc.finish()


def _decode_field(data: bytes, h: int, w: int) -> CompandingField:
    dec = RangeDecoder(data)
    a_model = SymbolModel(8)
    d_model = SymbolModel(2 * _DELTA_RANGE + 2)
    escape = 2 * _DELTA_RANGE + 1
    a_codes = np.empty(h * w, dtype=np.int64)
    n_codes = np.empty(h * w, dtype=np.int64)
    prev = None
    for j in range(h * w):
        a_codes[j] = dec.decode_symbol(a_model)
        if prev is None:
            s = dec.decode_uniform(16)
        else:
            sym = dec.decode_symbol(d_model)
            s = dec.decode_uniform(16) if sym == escape else prev + sym - _DELTA_RANGE
        n_codes[j] = prev = s
    if a_codes.max(initial=0) >= len(A_CANDIDATES):
        raise DecodeError("invalid companding parameter code")
    a = np.asarray(A_CANDIDATES)[a_codes].reshape(h, w)
    return CompandingField(a, dequantize_norm_scale(n_codes).reshape(h, w))


def _encode_flags(flags: np.ndarray) -> bytes:
    enc = RangeEncoder()
    model = SymbolModel(2)
    for f in flags.ravel().tolist():
        enc.encode_symbol(model, f)
    return enc.finish()


def _decode_flags(data: bytes, h: int, w: int) -> np.ndarray:
    dec = RangeDecoder(data)
    model = SymbolModel(2)
    return np.array([dec.decode_symbol(model) for _ in range(h * w)], dtype=np.uint8).reshape(h, w)


def encode_quantized(q: QuantizedMap, prefix: bytes = b""):
    """Range-code indices (and flags) of ``q``.

    Returns ``(flag_bytes, index_bytes, clamped)``; ``flag_bytes`` is empty
    unless the lattice is diamond.  ``prefix`` is prepended to the index
    section before the per-channel alphabet bounds.
    """
    h, w, c = q.shape
    idx = q.indices.reshape(h * w, c)
    clamped = int(np.count_nonzero((idx < _INDEX_MIN) | (idx > _INDEX_MAX)))
    idx = np.clip(idx, _INDEX_MIN, _INDEX_MAX)
    bounds = np.minimum(np.abs(idx).max(axis=0), _MAX_BOUND).astype(np.int64)
    diamond = q.spec.kind is LatticeKind.DIAMOND
    flags = q.coset_flags.reshape(h * w)
    flag_bytes = _encode_flags(flags) if diamond else b""
    n_ctx = 2 if diamond else 1
    models = [[SymbolModel(2 * int(bounds[ch]) + 2) for ch in range(c)] for _ in range(n_ctx)]
    enc = RangeEncoder()
    bounds_l = bounds.tolist()
    for row, f in zip(idx.tolist(), flags.tolist()):
        ms = models[f]
        for ch, v in enumerate(row):
            bnd = bounds_l[ch]
            if -bnd <= v <= bnd:
                enc.encode_symbol(ms[ch], v + bnd)
            else:
                enc.encode_symbol(ms[ch], 2 * bnd + 1)
                enc.encode_uniform(v - _INDEX_MIN, 16)
    index_bytes = prefix + bytes(bounds_l) + enc.finish()
    return flag_bytes, index_bytes, clamped


def decode_quantized(flag_bytes: bytes, index_bytes: bytes, shape, spec: LatticeSpec,
                     prefix_len: int = 0) -> QuantizedMap:
    h, w, c = shape
    diamond = spec.kind is LatticeKind.DIAMOND
    if diamond:
        flags = _decode_flags(flag_bytes, h, w).reshape(h * w)
    else:
        if flag_bytes:
            raise FormatError("flag section present for a lattice without cosets")
        flags = np.zeros(h * w, dtype=np.uint8)
    body = index_bytes[prefix_len:]
    if len(body) < c:
        raise TruncatedStreamError("index section shorter than its channel table")
    bounds = list(body[:c])
    dec = RangeDecoder(body[c:])
    models = [[SymbolModel(2 * b + 2) for b in bounds] for _ in range(2 if diamond else 1)]
    out = np.empty((h * w, c), dtype=np.int64)
    for j, f in enumerate(flags.tolist()):
        ms = models[f]
        for ch in range(c):
            bnd = bounds[ch]
            s = dec.decode_symbol(ms[ch])
            out[j, ch] = dec.decode_uniform(16) + _INDEX_MIN if s == 2 * bnd + 1 else s - bnd
    return QuantizedMap(out.reshape(h, w, c), flags.reshape(h, w), spec)


# --- image codec ------------------------------------------------------------


def compress(img: ImageBuffer, cfg: CodecConfig) -> EncodeResult:
    timings = {}
    t0 = time.perf_counter()
    H, W, C = img.pixels.shape
    cfg.check_image(H, W, C)
    stride = float(np.float32(cfg.lattice.stride))
    if not stride > 0:
        raise ParameterError("stride underflows float32")
    spec = cfg.lattice.with_stride(stride)
    y = analyze(img, cfg)
    timings["analyze"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fld = None
    saturated = 0
    if cfg.companding is Companding.ADAPTIVE:
        fld = estimate_field(y, cfg.window, stride, spec).quantized()
        y, saturated = compand_map(y, fld, return_saturation=True)
    q = quantize_lvq(y, spec)
    timings["quantize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    field_bytes = _encode_field(fld) if fld is not None else b""
    flag_bytes, index_bytes, clamped = encode_quantized(q, prefix=bytes([cfg.downsample]))
    timings["entropy"] = time.perf_counter() - t0

    header = _HEADER.pack(
        MAGIC, VERSION, int(cfg.transform), _KIND_CODES[spec.kind], spec.dimension,
        stride, H, W, C, int(cfg.companding), cfg.window,
    )
    body = bytearray(header)
    for sec in (field_bytes, flag_bytes, index_bytes):
        body += _U32.pack(len(sec)) + sec
    body += _U32.pack(zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    stream = Bitstream(bytes(body))
    return EncodeResult(
        stream=stream,
        quantized=q,
        field=fld,
        bpp=stream.bit_length / (H * W),
        saturated=saturated,
        clamped=clamped,
        timings=timings,
        section_bytes={
            "header": _HEADER.size + 3 * _U32.size + 4,
            "field": len(field_bytes),
            "flags": len(flag_bytes),
            "index": len(index_bytes),
        },
    )


def encode_image(img: ImageBuffer, cfg: CodecConfig) -> Bitstream:
    return compress(img, cfg).stream


def _parse(data: bytes):
    if len(data) < _HEADER.size:
        if data[:4] != MAGIC[: len(data)]:
            raise FormatError("bad magic")
        raise TruncatedStreamError("stream shorter than its header")
    fields = _HEADER.unpack_from(data, 0)
    if fields[0] != MAGIC:
        raise FormatError("bad magic")
    if fields[1] != VERSION:
        raise FormatError(f"unsupported stream version {fields[1]}")
    pos = _HEADER.size
    sections = []
    for _ in range(3):
        if pos + 4 > len(data):
            raise TruncatedStreamError("stream ends inside a section header")
        (n,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + n > len(data):
            raise TruncatedStreamError("stream ends inside a section")
        sections.append(data[pos : pos + n])
        pos += n
    if pos + 4 > len(data):
        raise TruncatedStreamError("stream ends before its checksum")
    (crc,) = _U32.unpack_from(data, pos)
    if pos + 4 != len(data):
        raise FormatError("trailing bytes after checksum")
    if zlib.crc32(data[:pos]) & 0xFFFFFFFF != crc:
        raise ChecksumError("CRC32 mismatch")
    return fields, sections


def decode_image(bs) -> ImageBuffer:
    data = bs.data if isinstance(bs, Bitstream) else bytes(bs)
    fields, (field_bytes, flag_bytes, index_bytes) = _parse(data)
    _, _, transform, kind, n, stride, H, W, C, companding, window = fields
    try:
        spec = LatticeSpec(_CODE_KINDS[kind], n, stride)
        if not index_bytes:
            raise TruncatedStreamError("empty index section")
        cfg = CodecConfig(transform, spec, companding, window, 0.0, index_bytes[0])
        cfg.check_image(H, W, C)
    except KeyError:
        raise FormatError(f"unknown lattice kind code {kind}") from None
    except (ValueError, LVQError) as exc:
        if isinstance(exc, DecodeError):
            raise
        raise FormatError(f"invalid stream configuration: {exc}") from exc
    b = cfg.block
    shape = (H // b, W // b, b * b * C)
    q = decode_quantized(flag_bytes, index_bytes, shape, spec, prefix_len=1)
    y = dequantize(q)
    if cfg.companding is Companding.ADAPTIVE:
        fld = _decode_field(field_bytes, shape[0], shape[1])
        y = inverse_compand_map(y, fld)
    elif field_bytes:
        raise FormatError("field section present with companding off")
    return synthesize(y, cfg)


# --- evaluation -------------------------------------------------------------


def distortion(a: ImageBuffer, b: ImageBuffer):
    """(MSE, PSNR in dB) over all samples; PSNR is +inf for identical images."""
    pa, pb = np.asarray(a.pixels, dtype=float), np.asarray(b.pixels, dtype=float)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    mse = float(np.mean((pa - pb) ** 2))
    psnr = math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)
    return mse, psnr


def evaluate(img: ImageBuffer, cfg: CodecConfig):
    """Encode, decode and measure -> (bpp, mse, psnr)."""
    res = compress(img, cfg)
    rec = decode_image(res.stream)
    mse, psnr = distortion(img, rec)
    return res.bpp, mse, psnr


def rd_sweep(img: ImageBuffer, cfg: CodecConfig, strides, lambdas=DEFAULT_LAMBDAS) -> list:
    """Run the codec at every stride; one RdPoint per (stride, lambda), sorted by bpp."""
    strides = list(strides)
    lambdas = list(lambdas)
    if not strides or any(not s > 0 for s in strides):
        raise ParameterError("strides must be a non-empty list of positive values")
    points = []
    for s in strides:
        try:
            bpp, mse, psnr = evaluate(img, cfg.with_stride(s))
        except LVQError as exc:
            raise type(exc)(f"stride {s}: {exc}") from exc
        for lam in lambdas:
            points.append(RdPoint(bpp, mse, psnr, bpp + lam * mse, lam, s))
    points.sort(key=lambda p: (p.bpp, p.stride, p.lam))
    return points


@dataclass(frozen=True)
class RateMatch:
    stride: float
    bpp: float
    mse: float
    mse_at_target: float
    target: float
    evaluations: int


def match_rate(img: ImageBuffer, cfg: CodecConfig, target_bpp: float, tol: float = 0.01,
               max_iter: int = 40, evaluator=None) -> RateMatch:
    """Bisection on log-stride until coded bpp is within ``tol`` of the target.

    ``mse_at_target`` interpolates log-MSE linearly in bpp between the final
    bracketing strides, removing the residual rate mismatch.
    """
    run = evaluator or (lambda s: evaluate(img, cfg.with_stride(s))[:2])
    cache = {}

    def at(s):
        s = float(np.float32(s))
        if s not in cache:
            cache[s] = run(s)
        return s, cache[s]

    s0, (b0, _) = at(cfg.lattice.stride)
    lo, hi = s0, s0  # bpp(lo) >= target >= bpp(hi)
    for _ in range(60):
        if at(lo)[1][0] >= target_bpp:
            break
        lo /= 2
    for _ in range(60):
        if at(hi)[1][0] <= target_bpp:
            break
        hi *= 2
    (lo, (blo, mlo)), (hi, (bhi, mhi)) = at(lo), at(hi)
    if not (blo >= target_bpp >= bhi):
        raise ParameterError(f"cannot bracket target rate {target_bpp} bpp")
    for _ in range(max_iter):
        if abs(blo / target_bpp - 1) <= tol and abs(bhi / target_bpp - 1) <= tol:
            break
        if hi / lo < 1 + 1e-6:
            break
        mid, (bm, mm) = at(math.sqrt(lo * hi))
        if bm >= target_bpp:
            lo, blo, mlo = mid, bm, mm
        else:
            hi, bhi, mhi = mid, bm, mm
    best = min(((lo, blo, mlo), (hi, bhi, mhi)), key=lambda t: abs(t[1] - target_bpp))
    if abs(best[1] / target_bpp - 1) > tol:
        raise ParameterError(
            f"rate {best[1]:.4f} bpp is not within {tol:.0%} of target {target_bpp:.4f}"
        )
    if blo != bhi and mlo > 0 and mhi > 0:
        t = (target_bpp - bhi) / (blo - bhi)
        interp = math.exp(math.log(mhi) + t * (math.log(mlo) - math.log(mhi)))
    else:
        interp = best[2]
    return RateMatch(best[0], best[1], best[2], interp, target_bpp, len(cache))
