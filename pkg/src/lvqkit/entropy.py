"""Adaptive range coding, empirical rate estimates and sideband accounting.

The coder is a 32-bit range coder with byte-wise renormalization and carry
propagation through a cached byte (the LZMA scheme).  Probabilities come from
order-0 adaptive frequency tables: every count starts at one, grows by
``increment`` per coded symbol, and the table is halved whenever its total
would exceed 2^16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, TruncatedStreamError

__all__ = [
    "MAX_TOTAL",
    "SymbolModel",
    "Bitstream",
    "RangeEncoder",
    "RangeDecoder",
    "encode_symbols",
    "decode_symbols",
    "entropy_bits",
    "empirical_rate",
    "sideband_cost",
]

MAX_TOTAL = 1 << 16
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class SymbolModel:
    """Adaptive frequency table over ``alphabet_size`` symbols.

    Cumulative counts live in a Fenwick tree so that coding and updating are
    O(log alphabet_size).
    """

    def __init__(self, alphabet_size: int, increment: int = 32, max_total: int = MAX_TOTAL):
        if alphabet_size < 1:
            raise ParameterError("alphabet_size must be >= 1")
        if alphabet_size > max_total // 2:
            raise ParameterError(f"alphabet of {alphabet_size} symbols exceeds the table limit")
        self.alphabet_size = alphabet_size
        self.increment = increment
        self.max_total = max_total
        self.counts = [1] * alphabet_size
        self._rebuild()

    def copy(self) -> "SymbolModel":
        other = SymbolModel.__new__(SymbolModel)
        other.alphabet_size = self.alphabet_size
        other.increment = self.increment
        other.max_total = self.max_total
        other.counts = list(self.counts)
        other._tree = list(self._tree)
        other.total = self.total
        other._top_bit = self._top_bit
        return other

    def _rebuild(self):
        n = self.alphabet_size
        tree = [0] + list(self.counts)
        for i in range(1, n + 1):
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self._tree = tree
        self.total = sum(self.counts)
        self._top_bit = 1 << (n.bit_length() - 1)

    def cumulative(self, symbol: int) -> int:
        """Sum of counts of symbols below ``symbol``."""
        s = 0
        i = symbol
        tree = self._tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, target: int):
        """Symbol whose cumulative interval contains ``target`` -> (symbol, start)."""
        pos = 0
        rem = target
        step = self._top_bit
        tree = self._tree
        n = self.alphabet_size
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= rem:
                pos = nxt
                rem -= tree[nxt]
            step >>= 1
        return pos, target - rem

    def update(self, symbol: int):
        inc = self.increment
        if self.total + inc > self.max_total:
            self.counts = [(c + 1) >> 1 for c in self.counts]
            self.counts[symbol] += inc
            self._rebuild()
            return
        self.counts[symbol] += inc
        self.total += inc
        i = symbol + 1
        n = self.alphabet_size
        tree = self._tree
        while i <= n:
            tree[i] += inc
            i += i & -i


@dataclass
class Bitstream:
    data: bytes = b""
    bit_length: int = field(default=None)

    def __post_init__(self):
        self.data = bytes(self.data)
        if self.bit_length is None:
            self.bit_length = 8 * len(self.data)
        if self.bit_length > 8 * len(self.data):
            raise ParameterError("bit_length exceeds the available bytes")


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            temp = self.cache
            out = self.out
            while True:
                out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if not self.cache_size:
                    break
            self.cache = (low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def encode(self, start: int, size: int, total: int):
        r = self.range // total
        self.low += r * start
        self.range = r * size
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def encode_symbol(self, model: SymbolModel, symbol: int):
        self.encode(model.cumulative(symbol), model.counts[symbol], model.total)
        model.update(symbol)

    def encode_uniform(self, value: int, bits: int):
        """Code ``value`` in [0, 2^bits) with a flat distribution (bits <= 16)."""
        self.encode(value, 1, 1 << bits)

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = _MASK32
        self.code = 0
        for _ in range(5):
            self.code = (self.code << 8) | self._next_byte()
        self.code &= _MASK32
        self._r = 1

    def _next_byte(self) -> int:
        if self.pos >= len(self.data):
            raise TruncatedStreamError("range-coded section ended early")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def _target(self, total: int) -> int:
        self._r = self.range // total
        return min(self.code // self._r, total - 1)

    def _consume(self, start: int, size: int):
        self.code -= start * self._r
        self.range = self._r * size
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32
            self.range <<= 8

    def decode_symbol(self, model: SymbolModel) -> int:
        symbol, start = model.find(self._target(model.total))
        self._consume(start, model.counts[symbol])
        model.update(symbol)
        return symbol

    def decode_uniform(self, bits: int) -> int:
        value = self._target(1 << bits)
        self._consume(value, 1)
        return value


def encode_symbols(symbols, model: SymbolModel) -> Bitstream:
    """Range-code ``symbols``; ``model`` is copied, the caller's table is untouched."""
    model = model.copy()
    enc = RangeEncoder()
    n = model.alphabet_size
    for s in symbols:
        s = int(s)
        if not 0 <= s < n:
            raise ParameterError(f"symbol {s} outside alphabet of size {n}")
        enc.encode_symbol(model, s)
    return Bitstream(enc.finish())


def decode_symbols(bs: Bitstream, count: int, model: SymbolModel) -> list:
    model = model.copy()
    data = bs.data if isinstance(bs, Bitstream) else bytes(bs)
    dec = RangeDecoder(data)
    return [dec.decode_symbol(model) for _ in range(count)]


def entropy_bits(values) -> float:
    """Total Shannon information of ``values`` under their own histogram."""
    values = np.asarray(values).ravel()
    if values.size == 0:
        return 0.0
    _, counts = np.unique(values, return_counts=True)
    p = counts / values.size
    return float(-(counts * np.log2(p)).sum())


def empirical_rate(q, pixels: int | None = None, field_bits: float = 0.0) -> float:
    """Estimated bits per pixel of a quantized map.

    Sums the per-channel index entropy (conditioned on the codebook flag, as
    the coder's tables are), the entropy of the flag stream for the diamond
    lattice, and ``field_bits`` for any transmitted companding field, then
    divides by ``pixels`` (default: number of spatial locations).
    """
    from .lattice import LatticeKind

    h, w, c = q.indices.shape
    if pixels is None:
        pixels = h * w
    flags = q.coset_flags.reshape(-1)
    idx = q.indices.reshape(-1, c)
    bits = 0.0
    for f in np.unique(flags):
        sel = idx[flags == f]
        bits += sum(entropy_bits(sel[:, ch]) for ch in range(c))
    if q.spec.kind is LatticeKind.DIAMOND:
        bits += entropy_bits(flags)
    return (bits + field_bits) / pixels


def sideband_cost(h: int, w: int, downsample: int) -> float:
    """Raw codebook-flag cost in bpp: one bit per (downsample x downsample) cell."""
    if downsample < 1 or h % downsample or w % downsample:
        raise ParameterError(f"{h}x{w} is not divisible by downsample {downsample}")
    return (h // downsample) * (w // downsample) / (h * w)
