"""Stochastic magnitude quantizer, bit accounting, and wire codec.

A vector is described by its smallest and largest magnitudes plus, per
entry, a sign and a level on the q-step lattice between the two extremes.
The level is randomized so the reconstruction is unbiased, and an entry
never moves by more than one lattice step.

Two bit counts coexist on purpose:

* ``bit_count`` charges the idealized ``64 + d*(1 + log2(q+1))`` bits and is
  what the protocol compares against channel capacity when picking q;
* ``wire_bits`` charges ``ceil(log2(q+1))`` bits per level, which is what
  the physical serializer actually packs.

The extremes are stored as IEEE-754 binary32 (that is the "64" above), so
the quantization grid is anchored at float32-representable values and the
codec round-trips payloads bit-exactly.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantizedPayload",
    "PayloadFormatError",
    "quantize",
    "dequantize",
    "bit_count",
    "wire_bits",
    "max_level_for_budget",
    "serialize",
    "parse",
]

# Wire format (all MSB-first):
#   header: d uint32, q uint32 (big-endian)
#   body:   x_min binary32, x_max binary32, d sign bits (1 = negative),
#           d level fields of ceil(log2(q+1)) bits, zero-padded to a byte.
_HEADER = struct.Struct(">II")
_EXTREMES = struct.Struct(">ff")
MAX_WIRE_LEVEL = 2**32 - 1  # q must fit the uint32 header field


class PayloadFormatError(ValueError):
    """Raised for malformed payload bytes or corrupt field values."""


def _f32_down(value: float) -> np.float32:
    v = np.float32(value)
    return np.nextafter(v, np.float32(-np.inf)) if float(v) > value else v


def _f32_up(value: float) -> np.float32:
    v = np.float32(value)
    return np.nextafter(v, np.float32(np.inf)) if float(v) < value else v


@dataclass(frozen=True)
class QuantizedPayload:
    x_min: float  # float32-representable magnitude extremes
    x_max: float
    q: int
    signs: np.ndarray  # int8, +1 or -1 (zero entries are stored as +1)
    levels: np.ndarray  # int64, each in [0, q]

    @property
    def dim(self) -> int:
        return self.levels.size


def quantize(x: np.ndarray, q: int, rng: np.random.Generator) -> QuantizedPayload:
    """Randomized-rounding quantization of x onto the q-level magnitude grid.

    Per entry, the normalized magnitude v in [0, 1] rounds down to level
    l = floor(v*q) with probability 1 - (v*q - l) and up to l+1 otherwise,
    which makes the reconstruction unbiased. When all magnitudes coincide
    (x_max == x_min after float32 rounding) every level is 0 and the
    reconstruction is exact.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a nonempty 1-D vector")
    if q < 1:
        raise ValueError("no budget: quantization level q must be >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite entries")
    mags = np.abs(x)
    # extremes go on the wire as binary32; round them outward so every
    # magnitude stays inside [x_min, x_max] and reconstruction never clamps
    lo, hi = float(mags.min()), float(mags.max())
    if lo == hi:
        x_min = x_max = float(np.float32(lo))
    else:
        x_min = float(_f32_down(lo))
        x_max = float(_f32_up(hi))
    if not math.isfinite(x_max):
        raise ValueError("magnitudes exceed the binary32 range of the extremes")
    signs = np.where(x < 0.0, -1, 1).astype(np.int8)
    if x_max == x_min:
        levels = np.zeros(x.size, dtype=np.int64)
    else:
        v = np.clip((mags - x_min) / (x_max - x_min), 0.0, 1.0)
        scaled = v * q
        low = np.floor(scaled)
        up = rng.random(x.size) < (scaled - low)
        levels = (low + up).astype(np.int64)
    return QuantizedPayload(x_min=x_min, x_max=x_max, q=int(q), signs=signs, levels=levels)


def dequantize(payload: QuantizedPayload) -> np.ndarray:
    """Deterministic inverse: sign * (x_min + (x_max - x_min) * level / q)."""
    levels = payload.levels
    if np.any(levels < 0) or np.any(levels > payload.q):
        raise PayloadFormatError("corrupt payload: level outside [0, q]")
    span = payload.x_max - payload.x_min
    return payload.signs * (payload.x_min + span * (levels / payload.q))


def bit_count(d: int, q: int) -> float:
    """Idealized payload size in bits: 64 + d*(1 + log2(q+1))."""
    if d < 1 or q < 1:
        raise ValueError("d and q must be >= 1")
    return 64.0 + d * (1.0 + math.log2(q + 1))


def wire_bits(d: int, q: int) -> int:
    """Physical body size in bits before byte padding (integer level fields)."""
    return 64 + d * (1 + _level_width(q))


def max_level_for_budget(d: int, budget_bits: float) -> int:
    """Largest q >= 1 whose idealized bit count fits the budget, else 0."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if bit_count(d, 1) > budget_bits:
        return 0
    lo = 1
    hi = 2
    while bit_count(d, hi) <= budget_bits:
        lo = hi
        hi *= 2
    # invariant: bit_count(lo) <= budget < bit_count(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bit_count(d, mid) <= budget_bits:
            lo = mid
        else:
            hi = mid
    return lo


def _level_width(q: int) -> int:
    return max(1, math.ceil(math.log2(q + 1)))


def _pack_fields(values: np.ndarray, width: int) -> np.ndarray:
    """Bit matrix (n, width), MSB first, from nonnegative int64 values."""
    as_bytes = values.astype(">u8").view(np.uint8).reshape(values.size, 8)
    bits = np.unpackbits(as_bytes, axis=1)
    return bits[:, 64 - width:]


def _unpack_fields(bits: np.ndarray, width: int) -> np.ndarray:
    padded = np.zeros((bits.shape[0], 64), dtype=np.uint8)
    padded[:, 64 - width:] = bits
    as_bytes = np.packbits(padded, axis=1)
    return as_bytes.reshape(-1).view(">u8").astype(np.int64)


def serialize(payload: QuantizedPayload) -> bytes:
    """Bit-exact wire encoding; parse(serialize(p), p.dim) == p."""
    d = payload.dim
    if payload.q > MAX_WIRE_LEVEL:
        raise PayloadFormatError(
            f"q={payload.q} exceeds the uint32 wire header ({MAX_WIRE_LEVEL})")
    width = _level_width(payload.q)
    sign_bits = (payload.signs < 0).astype(np.uint8).reshape(d, 1)
    level_bits = _pack_fields(payload.levels, width)
    body_bits = np.concatenate(
        [sign_bits.reshape(-1), level_bits.reshape(-1)])
    header = _HEADER.pack(d, payload.q)
    extremes = _EXTREMES.pack(payload.x_min, payload.x_max)
    return header + extremes + np.packbits(body_bits).tobytes()


def parse(data: bytes, d: int) -> QuantizedPayload:
    """Decode serialize() output; d cross-checks the header."""
    if len(data) < _HEADER.size + _EXTREMES.size:
        raise PayloadFormatError(f"truncated payload: {len(data)} bytes")
    header_d, q = _HEADER.unpack_from(data, 0)
    if header_d != d:
        raise PayloadFormatError(f"dimension mismatch: header {header_d}, expected {d}")
    if q < 1:
        raise PayloadFormatError("corrupt payload: q must be >= 1")
    x_min, x_max = _EXTREMES.unpack_from(data, _HEADER.size)
    width = _level_width(q)
    n_bits = d * (1 + width)
    body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size + _EXTREMES.size)
    if body.size * 8 < n_bits:
        raise PayloadFormatError(
            f"truncated payload body: {body.size * 8} bits, need {n_bits}")
    bits = np.unpackbits(body)[:n_bits]
    signs = np.where(bits[:d] == 1, -1, 1).astype(np.int8)
    levels = _unpack_fields(bits[d:].reshape(d, width), width)
    payload = QuantizedPayload(
        x_min=float(x_min), x_max=float(x_max), q=int(q), signs=signs, levels=levels)
    if np.any(levels > q):
        raise PayloadFormatError("corrupt payload: level outside [0, q]")
    return payload
