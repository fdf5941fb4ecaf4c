"""Ring arithmetic: wrapping, fixed-point codec, bit views."""

import numpy as np
import pytest

from mpfix import ring


@pytest.mark.parametrize("width", [8, 32, 64])
def test_add_mul_wrap_matches_python_ints(width):
    rng = np.random.default_rng(0)
    a = ring.random_elems(rng, (500,), width)
    b = ring.random_elems(rng, (500,), width)
    m = 1 << width
    assert np.array_equal(ring.add(a, b, width),
                          np.array([(int(x) + int(y)) % m for x, y in zip(a, b)],
                                   dtype=np.uint64))
    assert np.array_equal(ring.mul(a, b, width),
                          np.array([(int(x) * int(y)) % m for x, y in zip(a, b)],
                                   dtype=np.uint64))


def test_sub_neg_inverse():
    rng = np.random.default_rng(1)
    a = ring.random_elems(rng, (200,), 64)
    b = ring.random_elems(rng, (200,), 64)
    assert np.array_equal(ring.add(ring.sub(a, b, 64), b, 64), a)
    assert np.array_equal(ring.add(a, ring.neg(a, 64), 64), np.zeros(200, np.uint64))


@pytest.mark.parametrize("width,frac", [(64, 23), (64, 14), (32, 14), (31, 16)])
def test_encode_decode_roundtrip(width, frac):
    rng = np.random.default_rng(2)
    lim = 2.0 ** (width - frac - 2)
    x = rng.uniform(-min(lim, 1e4), min(lim, 1e4), 300)
    back = ring.decode(ring.encode(x, width, frac), width, frac)
    assert np.abs(back - x).max() <= 2.0 ** -frac


def test_to_signed_range():
    w = 16
    vals = np.array([0, 1, (1 << 15) - 1, 1 << 15, (1 << 16) - 1], dtype=np.uint64)
    signed = ring.to_signed(vals, w)
    assert list(signed) == [0, 1, 32767, -32768, -1]


def test_matmul_mod_2_64():
    rng = np.random.default_rng(3)
    a = ring.random_elems(rng, (7, 5), 64)
    b = ring.random_elems(rng, (5, 4), 64)
    got = ring.matmul(a, b, 64)
    want = np.zeros((7, 4), dtype=np.uint64)
    for i in range(7):
        for j in range(4):
            acc = 0
            for k in range(5):
                acc = (acc + int(a[i, k]) * int(b[k, j])) % (1 << 64)
            want[i, j] = acc
    assert np.array_equal(got, want)


def test_cast_down_truncates_high_bits():
    rng = np.random.default_rng(4)
    a = ring.random_elems(rng, (100,), 64)
    got = ring.cast_down(a, 64, 32)
    assert np.array_equal(got, a & np.uint64((1 << 32) - 1))


@pytest.mark.parametrize("width", [8, 31, 64])
def test_bits_roundtrip(width):
    rng = np.random.default_rng(5)
    a = ring.random_elems(rng, (64,), width)
    bits = ring.bits_of(a, width)
    assert bits.shape == (64, width)
    assert np.array_equal(ring.bits_to_uint(bits, width), a)
    # LSB first
    assert np.array_equal(bits[:, 0], (a & np.uint64(1)).astype(np.uint8))


def test_fits_rejects_overflow():
    assert ring.fits(100.0, 64, 23)
    assert not ring.fits(2.0 ** 45, 64, 23)
