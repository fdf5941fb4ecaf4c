"""Core interactive protocols on shared tensors.

Everything here is batched: one call on a tensor of any size costs the
same number of rounds as on a single element. Round counts per call:

* mul / matmul / and_gate: 1 (both masked differences open together)
* bit2a / compose:         1
* binary addition:         ceil(log2 m) + 1 (Kogge-Stone carry tree)
* adding a public value:   ceil(log2 m)    (generate bits are free)
* decompose:               1 + ceil(log2 w)
* gt:                      same as decompose

Comparison (gt) is strict: equal inputs yield 0. It reads the sign of
y - x, so both operands and their difference must stay inside
[-2^(w-1), 2^(w-1)).
"""

from __future__ import annotations

import numpy as np

from .. import ring
from ..session import PartySession
from ..sharing import AShare, BShare, add_public, xor_public


def mul(session: PartySession, x: AShare, y: AShare) -> AShare:
    """Element-wise product via one Beaver triple per element."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    w = x.width
    count = x.size
    a, b, c = session.store.take_triples(w, count)
    a, b, c = a.reshape(x.shape), b.reshape(x.shape), c.reshape(x.shape)

    d_open, e_open = session.open_many([x - a, y - b])
    z = ring.add(c.values, ring.mul(d_open, b.values, w), w)
    z = ring.add(z, ring.mul(e_open, a.values, w), w)
    if session.party == 0:
        z = ring.add(z, ring.mul(d_open, e_open, w), w)
    session.metrics.count(mul_count=1, mul_elems=count)
    return AShare(z, w, x.frac + y.frac)


def matmul(session: PartySession, x: AShare, y: AShare) -> AShare:
    return batch_matmul(session, [(x, y)])[0]


def batch_matmul(session: PartySession, pairs: list[tuple[AShare, AShare]]) -> list[AShare]:
    """Matrix products for several independent pairs in one round.

    Each pair (X: m x k, Y: k x r) consumes one matrix triple of the
    matching shape; all masked differences open together.
    """
    triples = []
    masked = []
    for x, y in pairs:
        if x.values.ndim != 2 or y.values.ndim != 2 or x.shape[1] != y.shape[0]:
            raise ValueError(f"bad matmul shapes {x.shape} @ {y.shape}")
        m, k = x.shape
        r = y.shape[1]
        a, b, c = session.store.take_matrix_triple(x.width, m, k, r)
        triples.append((a, b, c))
        masked.extend([x - a, y - b])

    opened = session.open_many(masked)
    out = []
    for idx, (x, y) in enumerate(pairs):
        w = x.width
        a, b, c = triples[idx]
        d_open, e_open = opened[2 * idx], opened[2 * idx + 1]
        z = ring.add(c.values, ring.matmul(d_open, b.values, w), w)
        z = ring.add(z, ring.matmul(a.values, e_open, w), w)
        if session.party == 0:
            z = ring.add(z, ring.matmul(d_open, e_open, w), w)
        m, k = x.shape
        session.metrics.count(matmul_count=1, matmul_macs=m * k * y.shape[1])
        out.append(AShare(z, w, x.frac + y.frac))
    return out


def and_gate(session: PartySession, x: BShare, y: BShare) -> BShare:
    """Bitwise AND via one binary triple per bit."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    count = x.size
    a, b, c = session.store.take_bin_triples(count)
    a, b, c = a.bits.reshape(x.shape), b.bits.reshape(x.shape), c.bits.reshape(x.shape)

    d_open, e_open = session.open_many([BShare(x.bits ^ a), BShare(y.bits ^ b)])
    z = c ^ (d_open & b) ^ (e_open & a)
    if session.party == 0:
        z = z ^ (d_open & e_open)
    session.metrics.count(and_count=1, and_elems=count)
    return BShare(z)


def _carry_prefix(session: PartySession, g: BShare, p: BShare) -> BShare:
    """Kogge-Stone carry tree over the trailing bit axis (LSB first).

    Returns G where G[..., i] is the carry out of position i. One AND
    round per level; generate and propagate updates share a single
    and_gate call.
    """
    m = g.shape[-1]
    gb, pb = g.bits, p.bits
    shift = 1
    while shift < m:
        g_hi, p_hi = gb[..., shift:], pb[..., shift:]
        g_lo, p_lo = gb[..., :-shift], pb[..., :-shift]
        last_level = shift * 2 >= m
        if last_level:
            # Propagate output is never read after the final level.
            left = BShare(p_hi)
            right = BShare(g_lo)
            anded = and_gate(session, left, right).bits
            new_g_hi = g_hi ^ anded
            new_p_hi = p_hi
        else:
            left = BShare(np.concatenate([p_hi, p_hi], axis=-1))
            right = BShare(np.concatenate([g_lo, p_lo], axis=-1))
            anded = and_gate(session, left, right).bits
            cut = g_hi.shape[-1]
            new_g_hi = g_hi ^ anded[..., :cut]
            new_p_hi = anded[..., cut:]
        gb = np.concatenate([gb[..., :shift], new_g_hi], axis=-1)
        pb = np.concatenate([pb[..., :shift], new_p_hi], axis=-1)
        shift *= 2
    return BShare(gb)


def _sum_from_carries(p0_bits: np.ndarray, carries: np.ndarray) -> BShare:
    shifted = np.concatenate(
        [np.zeros_like(carries[..., :1]), carries[..., :-1]], axis=-1
    )
    return BShare(p0_bits ^ shifted)


def public_add_bits(session: PartySession, pub_bits: np.ndarray, x: BShare) -> BShare:
    """Bits of (public value + shared value) mod 2^m.

    The generate layer is local because one operand is public:
    g_i = pub_i AND x_i needs no triple.
    """
    pub = np.asarray(pub_bits, dtype=np.uint8)
    if pub.shape != x.shape:
        raise ValueError(f"shape mismatch {pub.shape} vs {x.shape}")
    g = x.and_public(pub)
    p = xor_public(x, pub, session.party)
    p0 = p.bits.copy()
    carries = _carry_prefix(session, g, p)
    return _sum_from_carries(p0, carries.bits)


def binary_add(session: PartySession, x: BShare, y: BShare) -> BShare:
    """Bits of (x + y) mod 2^m for two bit-shared values."""
    g = and_gate(session, x, y)
    p = x ^ y
    p0 = p.bits.copy()
    carries = _carry_prefix(session, g, p)
    return _sum_from_carries(p0, carries.bits)


def bit2a(session: PartySession, b: BShare, width: int) -> AShare:
    """Convert XOR-shared bits to additive shares in Z_2^width.

    Opens b XOR r for a daBit r (one public bit per element), then
    x = c + r - 2cr reshares the bit arithmetically. The target width is
    independent of where the bits came from, which is what makes narrow
    decompositions feed wide arithmetic for free.
    """
    count = b.size
    r_arith, r_bit = session.store.take_dabits(width, count)
    r_arith = r_arith.reshape(b.shape)
    c = session.open_bits(b ^ BShare(r_bit.bits.reshape(b.shape)))

    c64 = c.astype(ring.U64)
    # r * (1 - 2c) + c, share-wise; the +c lands on party 0.
    factor = ring.sub(np.uint64(1), ring.add(c64, c64, width), width)
    z = ring.mul(r_arith.values, factor, width)
    if session.party == 0:
        z = ring.add(z, c64, width)
    session.metrics.count(bit2a_elems=count)
    return AShare(z, width, 0)


def compose(session: PartySession, bits: BShare, width: int, frac: int = 0) -> AShare:
    """Weighted recomposition sum(2^i * bit_i) over the trailing axis.

    All bit conversions batch into a single round.
    """
    m = bits.shape[-1]
    arith = bit2a(session, bits, width)
    weights = ring.wrap(np.uint64(1) << np.arange(m, dtype=ring.U64), width)
    vals = ring.wrap((arith.values * weights).sum(axis=-1, dtype=ring.U64), width)
    return AShare(vals, width, frac)


def decompose(session: PartySession, x: AShare) -> BShare:
    """Bit decomposition: BShare with trailing axis of x.width bits.

    Masks with a full-width edaBit, opens x - r (uniform, so the opening
    leaks nothing), then adds the public difference onto the shared bits
    of r with the carry tree.
    """
    w = x.width
    count = x.size
    r_arith, r_bits = session.store.take_edabits(w, w, count)
    r_arith = r_arith.reshape(x.shape)
    r_bits = BShare(r_bits.bits.reshape(x.shape + (w,)))

    c = session.open_arith(x - r_arith)
    pub = ring.bits_of(c, w)
    return public_add_bits(session, pub, r_bits)


def gt(session: PartySession, x: AShare, y: AShare) -> BShare:
    """Strict comparison: 1 iff x > y, 0 on equality.

    Implemented as the sign bit of y - x, so it is exact whenever the
    difference stays inside the signed range of the ring.
    """
    diff = y - x
    bits = decompose(session, diff)
    return bits[..., diff.width - 1]


def const_share(session: PartySession, value, width: int, frac: int, shape=()) -> AShare:
    """Fixed-point encode a public constant as a degenerate sharing."""
    enc = ring.encode(np.broadcast_to(np.asarray(value, np.float64), shape), width, frac)
    if session.party == 0:
        return AShare(enc.copy(), width, frac)
    return AShare(np.zeros(enc.shape, dtype=ring.U64), width, frac)


def add_const(session: PartySession, x: AShare, value: float) -> AShare:
    """Add a public fixed-point constant (party 0 adjusts its share)."""
    enc = ring.encode_scalar(value, x.width, x.frac)
    return add_public(x, enc, session.party)
