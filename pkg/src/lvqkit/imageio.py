"""Minimal binary PGM (P5) / PPM (P6) and raw feature-map file I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, DimensionMismatchError

__all__ = [
    "ImageBuffer",
    "read_pnm",
    "write_pnm",
    "encode_pnm",
    "decode_pnm",
    "read_features",
    "write_features",
]

FEATURE_MAGIC = b"LVQF"


@dataclass
class ImageBuffer:
    """8-bit image, H x W x C with C in {1, 3}."""

    pixels: np.ndarray
    colorspace: str = ""
    clipped: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise DimensionMismatchError(f"image must be H x W x {{1,3}}, got {px.shape}")
        if px.dtype != np.uint8:
            if px.min(initial=0) < 0 or px.max(initial=0) > 255:
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px
        if not self.colorspace:
            self.colorspace = "gray" if px.shape[2] == 1 else "rgb"

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    i = 0
    while len(out) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("truncated PNM header")
        out.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return out, i + 1


def decode_pnm(data: bytes) -> ImageBuffer:
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise FormatError(f"only 8-bit PNM is supported (maxval {maxval})")
    ch = 1 if magic == b"P5" else 3
    raster = np.frombuffer(data, dtype=np.uint8, count=h * w * ch, offset=offset)
    if raster.size != h * w * ch:
        raise FormatError("PNM raster is truncated")
    return ImageBuffer(raster.reshape(h, w, ch).copy())


def encode_pnm(img: ImageBuffer) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + img.pixels.tobytes()


def read_pnm(path) -> ImageBuffer:
    return decode_pnm(Path(path).read_bytes())


def write_pnm(path, img: ImageBuffer):
    Path(path).write_bytes(encode_pnm(img))


def write_features(path, y):
    """Feature map as magic + h, w, c (u32 LE) followed by float32 LE data."""
    data = np.asarray(getattr(y, "data", y), dtype="<f4")
    h, w, c = data.shape
    Path(path).write_bytes(FEATURE_MAGIC + struct.pack("<III", h, w, c) + data.tobytes())


def read_features(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != FEATURE_MAGIC or len(raw) < 16:
        raise FormatError("not a feature-map file")
    h, w, c = struct.unpack("<III", raw[4:16])
    body = np.frombuffer(raw, dtype="<f4", offset=16)
    if body.size != h * w * c:
        raise FormatError("feature-map payload size does not match its header")
    return body.reshape(h, w, c).astype(float)
