"""Secret sharing: reconstruction, masking quality, public mixing."""

import numpy as np
import pytest

from mpfix import ring
from mpfix.sharing import (AShare, add_public, reconstruct_arith,
                           reconstruct_bits, share_arith, share_bits,
                           xor_public)


@pytest.mark.parametrize("n", [2, 3, 5])
@pytest.mark.parametrize("width", [32, 64])
def test_arith_share_reconstruct(n, width):
    rng = np.random.default_rng(10)
    secret = ring.random_elems(rng, (64,), width)
    shares = share_arith(rng, secret, n, width, frac=7)
    assert len(shares) == n
    assert all(s.frac == 7 for s in shares)
    assert np.array_equal(reconstruct_arith(shares), secret)


def test_bit_share_reconstruct():
    rng = np.random.default_rng(11)
    bits = ring.random_bits(rng, (40, 8))
    shares = share_bits(rng, bits, 4)
    assert np.array_equal(reconstruct_bits(shares), bits)


def test_single_share_leaks_nothing_chi2():
    # each party's share of a constant secret should look uniform; a crude
    # chi-square over the low byte catches e.g. forgetting the mask draw
    from scipy import stats
    rng = np.random.default_rng(12)
    secret = np.zeros(20000, dtype=np.uint64)
    shares = share_arith(rng, secret, 2, 64)
    low = (shares[0].values & np.uint64(0xFF)).astype(np.int64)
    counts = np.bincount(low, minlength=256)
    chi2 = ((counts - counts.mean()) ** 2 / counts.mean()).sum()
    # dof=255; 99.9th percentile is ~330
    assert chi2 < 400, chi2


def test_add_public_hits_party_zero_only():
    rng = np.random.default_rng(13)
    secret = ring.random_elems(rng, (16,), 64)
    shares = share_arith(rng, secret, 3, 64)
    const = ring.to_ring(np.arange(16), 64)
    bumped = [add_public(s, const, p) for p, s in enumerate(shares)]
    assert np.array_equal(reconstruct_arith(bumped), ring.add(secret, const, 64))


def test_xor_public():
    rng = np.random.default_rng(14)
    bits = ring.random_bits(rng, (32,))
    shares = share_bits(rng, bits, 2)
    pub = ring.random_bits(rng, (32,))
    mixed = [xor_public(s, pub, p) for p, s in enumerate(shares)]
    assert np.array_equal(reconstruct_bits(mixed), bits ^ pub)


def test_share_algebra():
    rng = np.random.default_rng(15)
    a = ring.random_elems(rng, (8,), 64)
    b = ring.random_elems(rng, (8,), 64)
    sa = share_arith(rng, a, 2, 64)
    sb = share_arith(rng, b, 2, 64)
    assert np.array_equal(reconstruct_arith([sa[0] + sb[0], sa[1] + sb[1]]),
                          ring.add(a, b, 64))
    assert np.array_equal(reconstruct_arith([sa[0] - sb[0], sa[1] - sb[1]]),
                          ring.sub(a, b, 64))
    tripled = [s.mul_public(3) for s in sa]
    assert np.array_equal(reconstruct_arith(tripled),
                          ring.mul(a, ring.to_ring(3, 64), 64))
