"""Fixed-point non-linear functions on shared tensors.

Each function takes and returns arithmetic shares; the fixed-point
precision is read off the input share (x.frac). The common recipe:
bit-decompose once, derive everything needed from the bits (sign,
magnitude window, integer/fraction split), then finish with plain
polynomial arithmetic. All conversions for one call are batched, so the
round count is independent of tensor size.

``exp2_*`` coefficients approximate 2^z on [0, 1); ``log2_*``
approximate log2(1 + z) on [-0.25, 0.5). The square-completed variant
rewrites the quartic as k4*(((z+t3)^2+t2)^2 + t1*z + t0) with k4
rounded to a power of two, which drops the evaluation cost to two
multiplications and one scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ring
from .session import PartySession
from .sharing import AShare, BShare, add_public
from .protocols import (
    add_const,
    and_gate,
    bit2a,
    compose,
    const_share,
    decompose,
    evaluate_poly,
    evaluate_square_completed,
    gt,
    lmo,
    mul,
    public_add_bits,
    scale_fixed,
    truncate,
    unsigned_truncate,
)

LOG2_E = math.log2(math.e)
LN2 = math.log(2.0)

# 2^z on [0, 1), degree 4 minimax fit, c0 first.
EXP2_COEFFS = (1.00000259, 0.69300383, 0.24144276, 0.05201146, 0.01353417)

# log2(1 + z) on [-0.25, 0.5), degree 4, zero constant term.
LOG2_COEFFS = (0.0, 1.442547, -0.726980, 0.496404, -0.268344)

# Degree-4 Taylor series of 2^z around 0, used only by the baseline
# exponentiation for comparison runs.
TAYLOR_EXP2 = tuple(LN2 ** k / math.factorial(k) for k in range(5))


@dataclass(frozen=True)
class SquareCoeffs:
    """Square-completed quartic: lead * (((z+t3)^2 + t2)^2 + t1*z + t0),
    with |lead| an exact power of two (2^-lead_shift)."""

    lead_shift: int
    negative: bool
    t3: float
    t2: float
    t1: float
    t0: float

    @property
    def lead(self) -> float:
        v = 2.0 ** -self.lead_shift
        return -v if self.negative else v

    def as_dense(self) -> tuple:
        """Expand to plain c0..c4 coefficients (for identity checks)."""
        k = self.lead
        # ((z+t3)^2 + t2)^2 = z^4 + 4 t3 z^3 + (6 t3^2 + 2 t2) z^2
        #                     + (4 t3^3 + 4 t2 t3) z + (t3^2 + t2)^2
        c4 = k
        c3 = k * 4 * self.t3
        c2 = k * (6 * self.t3 ** 2 + 2 * self.t2)
        c1 = k * (4 * self.t3 ** 3 + 4 * self.t2 * self.t3 + self.t1)
        c0 = k * ((self.t3 ** 2 + self.t2) ** 2 + self.t0)
        return (c0, c1, c2, c3, c4)


EXP2_SQUARE = SquareCoeffs(lead_shift=6, negative=False,
                           t3=0.96074360, t2=6.15066406,
                           t1=24.02000383, t0=23.85013773)

LOG2_SQUARE = SquareCoeffs(lead_shift=2, negative=True,
                           t3=-0.46246981, t2=0.712932283,
                           t1=-0.366125013, t0=-0.858977912)


@dataclass(frozen=True)
class ApproxParams:
    """Tunables for the non-linear approximations."""

    newton_iters: int = 5  # q^(2^d) residual; 5 covers p=26
    eps: float = 2.0 ** -14  # strictness shift applied by maxcut
    exp_coeffs: tuple = EXP2_COEFFS
    exp_square: SquareCoeffs = EXP2_SQUARE
    log_coeffs: tuple = LOG2_COEFFS
    log_square: SquareCoeffs = LOG2_SQUARE


DEFAULT_PARAMS = ApproxParams()


def _clog2(n: int) -> int:
    return max(1, (n - 1).bit_length())


def _compose_arith(vals: np.ndarray, width: int, frac: int) -> AShare:
    """Weighted sum 2^i * bit_i over already-converted bit shares."""
    m = vals.shape[-1]
    weights = np.uint64(1) << np.arange(m, dtype=ring.U64)
    summed = ring.wrap((vals * weights).sum(axis=-1, dtype=ring.U64), width)
    return AShare(summed, width, frac)


def _pow2_product(session: PartySession, int_bits: list[AShare]) -> AShare:
    """prod_i (2^(2^i) * b_i - b_i + 1): equals 2^(composed integer)."""
    out: AShare | None = None
    for i, b in enumerate(int_bits):
        factor = add_public(b.mul_public((1 << (1 << i)) - 1), 1, session.party)
        out = factor if out is None else mul(session, out, factor)
    return out


def _newton_product(session: PartySession, z: AShare, frac: int,
                    iters: int) -> AShare:
    """prod_{i<d} (1 + (1-z)^(2^i)), the closed form of d Newton steps
    for 1/z with initial guess 1. Converges for z in (0, 2)."""
    q = add_const(session, -z, 1.0)
    acc = add_const(session, q, 1.0)
    for _ in range(1, iters):
        q = truncate(session, mul(session, q, q), frac)
        acc = truncate(session, mul(session, acc, add_const(session, q, 1.0)), frac)
    return acc


def reciprocal(session: PartySession, x: AShare,
               params: ApproxParams = DEFAULT_PARAMS) -> AShare:
    """Share of approximately 1/x for x != 0, |x| in [2^-p, 2^p).

    Scales |x| into [0.5, 1] with a power of two read off the leftmost
    one, runs the product form of Newton's iteration there, then scales
    back and restores the sign. Negatives ride on a pure bit flip
    instead of a full negation, which costs at most one unit in the
    last place.
    """
    w, p = x.width, x.frac
    with session.scope("reciprocal"):
        bits = decompose(session, x)
        sign = bits[..., w - 1]
        # Fold the sign into the magnitude window: for x < 0 these are
        # the bits of |x| - 2^-p.
        mag = BShare(bits.bits[..., :w - 1] ^ bits.bits[..., w - 1:w])
        s = bit2a(session, sign, w)
        x_pos = x - mul(session, s, x).mul_public(2)

        onehot = lmo(session, mag)
        # Reverse the low 2p window: a leftmost one at position e maps
        # to the scaling factor 2^(p-1-e). Positions >= 2p would scale
        # inputs beyond 2^p whose reciprocal underflows anyway.
        window = onehot.bits[..., :2 * p][..., ::-1].copy()
        t = compose(session, BShare(window), w, frac=p)

        z = truncate(session, mul(session, t, x_pos), p)
        y = _newton_product(session, z, p, params.newton_iters)
        y = truncate(session, mul(session, t, y), p)
        return y - mul(session, s, y).mul_public(2)


def exponentiation(session: PartySession, x: AShare,
                   params: ApproxParams = DEFAULT_PARAMS) -> AShare:
    """Share of approximately e^x.

    Works in base 2: splits z = x*log2(e) + bias into integer and
    fraction bits off one decomposition (the bias makes z non-negative
    for every input that does not underflow), builds 2^int as a product
    of shared factors, approximates 2^frac by a quartic, and removes
    the 2^bias factor with the final truncation. The bias is p, capped
    so that the pre-truncation value int(z) + p + 1 stays inside the
    signed ring for inputs up to +16; inputs below -bias*ln2 come out
    as exact zero.
    """
    w, p = x.width, x.frac
    bias = min(p, 38 - p)
    with session.scope("exponentiation"):
        xp = scale_fixed(session, x, LOG2_E, p)  # precision 2p, no truncation
        xb = add_const(session, xp, float(bias))
        bits = decompose(session, xb)
        # Slicing from bit p both drops the doubled precision (free
        # truncation) and selects the fraction window.
        c = _clog2(w - p - 1)
        seg = np.concatenate(
            [bits.bits[..., p:2 * p], bits.bits[..., 2 * p:2 * p + c],
             bits.bits[..., w - 1:w]], axis=-1)
        conv = bit2a(session, BShare(seg), w)

        t = _compose_arith(conv.values[..., :p], w, p)
        int_bits = [AShare(conv.values[..., p + i], w) for i in range(c)]
        pow_int = _pow2_product(session, int_bits)
        y = mul(session, pow_int, evaluate_poly(session, t, params.exp_coeffs, p))

        sgn = AShare(conv.values[..., p + c], w)
        s = add_public(-sgn, 1, session.party)
        return truncate(session, mul(session, s, y), bias, out_frac=p)


def logarithm(session: PartySession, x: AShare,
              params: ApproxParams = DEFAULT_PARAMS,
              big_input_check: bool = False) -> AShare:
    """Share of approximately ln(x) for x > 0.

    Doubly scales x into [0.75, 1.5) using the leftmost one and the bit
    right below it, evaluates a quartic for log2 there, and adds the
    base-2 exponent back. Without ``big_input_check`` the input must
    stay below 2^p; with it, a comparison routes large inputs through a
    pre-shift of w-2p bits whose log is added back at the end.
    """
    w, p = x.width, x.frac
    with session.scope("logarithm"):
        if big_input_check:
            threshold = const_share(session, 2.0 ** p - 2.0 ** -p, w, p, x.shape)
            big = bit2a(session, gt(session, x, threshold), w)
            shifted = unsigned_truncate(session, x, w - 2 * p, out_frac=p)
            x = x + mul(session, big, shifted - x)

        bits = decompose(session, x)
        window = bits[..., :2 * p]
        onehot = lmo(session, window)
        # The bit one below the leftmost one decides whether the
        # power-of-two scaling lands in [0.5, 0.75) and needs doubling.
        below = np.concatenate(
            [onehot.bits[..., 1:], np.zeros_like(onehot.bits[..., :1])], axis=-1)
        paired = and_gate(session, window, BShare(below))
        r_bits = np.bitwise_xor.reduce(paired.bits, axis=-1)

        seg = np.concatenate([onehot.bits, r_bits[..., None]], axis=-1)
        conv = bit2a(session, BShare(seg), w)
        oh_vals = conv.values[..., :2 * p]
        r = AShare(conv.values[..., 2 * p], w)

        # Base-2 exponent of the scaling: one-hot position e contributes
        # e - p; integer valued, lifted to precision p by a shift.
        exp_weights = ring.to_ring(np.arange(2 * p, dtype=np.int64) - p, w)
        y_l = AShare(ring.wrap((oh_vals * exp_weights).sum(axis=-1, dtype=ring.U64), w), w)
        # Scaling factor m = 2^(p-1-e) read off the mirrored one-hot.
        m_weights = np.uint64(1) << (np.uint64(2 * p - 1) - np.arange(2 * p, dtype=ring.U64))
        m = AShare(ring.wrap((oh_vals * m_weights).sum(axis=-1, dtype=ring.U64), w), w, p)

        doubled = x.mul_public(2) - mul(session, x, r)
        t = truncate(session, mul(session, doubled, m), p)
        t = add_const(session, t, -1.0)
        y_r = evaluate_poly(session, t, params.log_coeffs, p)

        pre = y_r + y_l.mul_public(1 << p, frac_delta=p) + r.mul_public(1 << p, frac_delta=p)
        y = truncate(session, scale_fixed(session, pre, LN2, p), p)
        if big_input_check:
            y = y + scale_fixed(session, big, (w - 2 * p) * LN2, p)
        return y


def baseline_exp(session: PartySession, x: AShare,
                 params: ApproxParams = DEFAULT_PARAMS) -> AShare:
    """Share of approximately e^x, comparison baseline.

    Emulates a 31-bit value domain at precision 16 inside the wide
    ring: after the base change the value is reduced mod 2^31 and all
    bit-level work happens on those 31 bits, so the narrow
    configuration's overflow behavior is reproduced honestly (inputs
    much above (31-16)*ln2 wrap and come out garbage). Negative inputs
    are fixed up with a 2^c-bit corrective truncation; inputs below
    -(31-16-1) are gated to zero via a binary range check.
    """
    w, p = x.width, x.frac
    l_eff = 31
    with session.scope("baseline_exp"):
        xp = truncate(session, scale_fixed(session, x, LOG2_E, p), p)
        narrowed = AShare(ring.cast_down(xp.values, w, l_eff), l_eff, p)
        bits = decompose(session, narrowed)

        # Range gate: sign of x' + (l-p-1) in the narrow domain.
        gate_enc = ring.encode_scalar(float(l_eff - p - 1), l_eff, p)
        pub = np.broadcast_to(ring.bits_of(gate_enc, l_eff), bits.shape).copy()
        gate_bit = public_add_bits(session, pub, bits)[..., l_eff - 1]

        c = _clog2(l_eff - p)
        seg = np.concatenate(
            [bits.bits[..., :p], bits.bits[..., p:p + c],
             bits.bits[..., l_eff - 1:l_eff], gate_bit.bits[..., None]], axis=-1)
        conv = bit2a(session, BShare(seg), w)

        t = _compose_arith(conv.values[..., :p], w, p)
        int_bits = [AShare(conv.values[..., p + i], w) for i in range(c)]
        pow_int = _pow2_product(session, int_bits)
        d_poly = evaluate_poly(session, t, TAYLOR_EXP2, p)
        y_pos = mul(session, pow_int, d_poly)
        # For negatives the integer window composed 2^(int mod 2^c);
        # dividing by 2^(2^c) restores the true (negative) exponent.
        y_neg = truncate(session, y_pos, 1 << c, out_frac=p)

        sgn = AShare(conv.values[..., p + c], w)
        y = y_pos + mul(session, sgn, y_neg - y_pos)
        keep = add_public(-AShare(conv.values[..., p + c + 1], w), 1, session.party)
        return mul(session, keep, y)


def attention_exp(session: PartySession, x: AShare,
                  params: ApproxParams = DEFAULT_PARAMS) -> AShare:
    """Share of approximately 2^x from a narrow pre-scaled input.

    The input rides in the half-width ring with the base change to 2
    already folded upstream (into plaintext weights or an explicit
    scaling) and is at most 0, as guaranteed downstream of maxcut. The
    output lands in the double-width ring; the widening is free because
    the bit conversions pick their target ring independently of where
    the bits came from.

    The quartic is evaluated in square-completed form with its leading
    coefficient rounded to 2^-6 and fused into a truncation. That
    rounding scales the whole polynomial by k4'/k4; the compensation is
    folded into the public bias constant (p + log2(k4/k4')), costing
    nothing.
    """
    w_in, p = x.width, x.frac
    w_out = min(64, 2 * w_in)
    sq = params.exp_square
    with session.scope("attention_exp"):
        delta = math.log2(params.exp_coeffs[4]) + sq.lead_shift
        xb = add_const(session, x, float(p) + delta)
        bits = decompose(session, xb)

        c = _clog2(p)
        seg = np.concatenate(
            [bits.bits[..., :p], bits.bits[..., p:p + c],
             bits.bits[..., w_in - 1:w_in]], axis=-1)
        conv = bit2a(session, BShare(seg), w_out)

        t = _compose_arith(conv.values[..., :p], w_out, p)
        int_bits = [AShare(conv.values[..., p + i], w_out) for i in range(c)]
        pow_int = _pow2_product(session, int_bits)
        ev = evaluate_square_completed(
            session, t, sq.lead_shift, sq.t3, sq.t2,
            sq.lead * sq.t1, sq.lead * sq.t0, p)
        y = mul(session, pow_int, ev)

        sgn = AShare(conv.values[..., p + c], w_out)
        s = add_public(-sgn, 1, session.party)
        return truncate(session, mul(session, s, y), p, out_frac=p)
