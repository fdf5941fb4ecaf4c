"""Wrapping arithmetic on Z_2^w and two's-complement fixed-point codecs.

All ring values are stored as numpy uint64 arrays masked to the active
bit width. The two supported public widths are 64 and 32; the helpers are
generic in w so tests can run tiny rings (e.g. w=8) exhaustively and the
31-bit emulation used by the baseline exponentiation works unchanged.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64
FULL_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

WIDTH_64 = 64
WIDTH_32 = 32


def mask(width: int) -> np.uint64:
    """All-ones mask for a w-bit ring element."""
    if width == 64:
        return FULL_MASK
    return np.uint64((1 << width) - 1)


def wrap(values: np.ndarray, width: int) -> np.ndarray:
    """Reduce uint64 values into Z_2^w."""
    v = np.asarray(values, dtype=U64)
    if width == 64:
        return v
    return v & mask(width)


def to_ring(values, width: int) -> np.ndarray:
    """Map integers (possibly negative) into Z_2^w as uint64."""
    arr = np.asarray(values)
    if arr.dtype == U64:
        return wrap(arr, width)
    # Route through int64 so negative integers two's-complement correctly.
    return wrap(np.asarray(arr, dtype=np.int64).view(U64), width)


def add(a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    return wrap(np.asarray(a, U64) + np.asarray(b, U64), width)


def sub(a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    return wrap(np.asarray(a, U64) - np.asarray(b, U64), width)


def neg(a: np.ndarray, width: int) -> np.ndarray:
    return wrap(np.uint64(0) - np.asarray(a, U64), width)


def mul(a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    return wrap(np.asarray(a, U64) * np.asarray(b, U64), width)


def matmul(a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    """Matrix product in Z_2^w. numpy integer matmul wraps mod 2^64."""
    return wrap(np.matmul(np.asarray(a, U64), np.asarray(b, U64)), width)


def to_signed(values: np.ndarray, width: int) -> np.ndarray:
    """Centered representative in [-2^(w-1), 2^(w-1)) as int64."""
    v = wrap(values, width)
    if width == 64:
        return v.view(np.int64)
    sign_bit = np.uint64(1 << (width - 1))
    # Sign extend: subtract 2^w where the top bit is set.
    out = v.astype(np.int64)
    return np.where(v & sign_bit != 0, out - np.int64(1 << width), out)


def encode(x, width: int, frac: int) -> np.ndarray:
    """Fixed-point encode: floor(x * 2^frac) two's complement in Z_2^w.

    Requires 0 <= frac < width/2 for products of two encoded values to
    stay interpretable; the representable range is
    [-2^(width-1-frac), 2^(width-1-frac)).
    """
    scaled = np.floor(np.asarray(x, dtype=np.float64) * float(1 << frac))
    return to_ring(scaled.astype(np.int64), width)


def decode(values: np.ndarray, width: int, frac: int) -> np.ndarray:
    """Inverse of encode (up to the floor rounding)."""
    return to_signed(values, width).astype(np.float64) / float(1 << frac)


def encode_scalar(x: float, width: int, frac: int) -> np.uint64:
    return U64(encode(np.asarray([x]), width, frac)[0])


def fits(x, width: int, frac: int) -> bool:
    """True when x encodes without overflow."""
    lim = float(1 << (width - 1 - frac))
    arr = np.asarray(x, dtype=np.float64)
    return bool(np.all(arr >= -lim) and np.all(arr < lim))


def cast_down(values: np.ndarray, width_from: int, width_to: int) -> np.ndarray:
    """Modulo reduction Z_2^a -> Z_2^b for b <= a; share-wise safe."""
    if width_to > width_from:
        raise ValueError("cast_down cannot widen")
    return wrap(values, width_to)


def bits_of(values: np.ndarray, width: int) -> np.ndarray:
    """Public bit decomposition, LSB first, shape (..., width), dtype uint8."""
    v = wrap(np.asarray(values, U64), width)
    shifts = np.arange(width, dtype=U64)
    return ((v[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_uint(bits: np.ndarray, width: int) -> np.ndarray:
    """Public bit composition, LSB first along the trailing axis."""
    b = np.asarray(bits, dtype=U64)
    weights = (np.uint64(1) << np.arange(b.shape[-1], dtype=U64))
    return wrap((b * weights).sum(axis=-1, dtype=U64), width)


def random_elems(rng: np.random.Generator, shape, width: int) -> np.ndarray:
    """Uniform ring elements drawn from a counter-based generator."""
    n = int(np.prod(shape)) if shape else 1
    raw = np.frombuffer(rng.bytes(8 * max(n, 1)), dtype="<u8").copy()
    return wrap(raw.reshape(shape), width)


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    raw = np.frombuffer(rng.bytes(max(n, 1)), dtype=np.uint8).copy()
    return (raw & np.uint8(1)).reshape(shape)
