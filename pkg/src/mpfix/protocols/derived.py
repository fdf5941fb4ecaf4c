"""Protocols derived from the basic layer: truncation, fixed-point
scaling, polynomial evaluation, leftmost-one extraction, maximum.

Truncation here is the probabilistic mask-and-open construction: the
result deviates from floor(x / 2^f) by at most one ring unit, the
deviation is an unbiased stochastic rounding, and exact inputs (low f
bits all zero) truncate exactly. One round per call.
"""

from __future__ import annotations

import numpy as np

from .. import ring
from ..session import PartySession
from ..sharing import AShare, BShare, add_public
from .basic import add_const, and_gate, bit2a, decompose, gt, mul


def _truncate_core(session: PartySession, x: AShare, f: int) -> AShare:
    """floor(x / 2^f) + carry for unsigned x in [0, 2^(w-1)).

    Masks with r = r_lo + 2^f * r_hi built from two edaBits so the high
    part is already arithmetically shared; opening x + r never wraps the
    ring. The dropped carry of the low halves is the +1 deviation.
    """
    w = x.width
    count = x.size
    r_lo, _ = session.store.take_edabits(w, f, count)
    r_lo = r_lo.reshape(x.shape)
    hi_width = w - 1 - f
    if hi_width > 0:
        r_hi, _ = session.store.take_edabits(w, hi_width, count)
        r_hi = r_hi.reshape(x.shape)
    else:
        r_hi = AShare(np.zeros(x.shape, dtype=ring.U64), w)

    masked = x + r_lo + r_hi.mul_public(np.uint64(1) << np.uint64(f))
    c = session.open_arith(masked)
    c_hi = ring.wrap(c >> np.uint64(f), w)
    z = add_public(-r_hi, c_hi, session.party)
    return AShare(z.values, w, x.frac)


def unsigned_truncate(session: PartySession, x: AShare, f: int,
                      out_frac: int | None = None) -> AShare:
    """Probabilistic right shift by f for x reconstructing in [0, 2^(w-1))."""
    if f == 0:
        return x.copy()
    z = _truncate_core(session, x, f)
    session.metrics.count(trunc_count=1)
    return z.with_frac(x.frac - f if out_frac is None else out_frac)


def truncate(session: PartySession, x: AShare, f: int,
             out_frac: int | None = None) -> AShare:
    """Signed probabilistic truncation for x in [-2^(w-2), 2^(w-2)).

    Shifts into the unsigned range, truncates, shifts back.
    """
    if f == 0:
        return x.copy()
    w = x.width
    bias = np.uint64(1) << np.uint64(w - 2)
    shifted = add_public(x, bias, session.party)
    z = _truncate_core(session, shifted, f)
    unbias = np.uint64(1) << np.uint64(w - 2 - f)
    z = add_public(z, ring.neg(unbias, w), session.party)
    session.metrics.count(trunc_count=1)
    return z.with_frac(x.frac - f if out_frac is None else out_frac)


def scale_fixed(session: PartySession, x: AShare, const: float,
                const_frac: int | None = None) -> AShare:
    """Multiply by a public fixed-point constant. Local, raises precision.

    The result sits at frac x.frac + const_frac; pair with truncate to
    come back down.
    """
    cf = x.frac if const_frac is None else const_frac
    enc = ring.encode_scalar(const, x.width, cf)
    session.metrics.count(scale_count=1)
    return AShare(ring.mul(x.values, enc, x.width), x.width, x.frac + cf)


def evaluate_poly(session: PartySession, x: AShare, coeffs: tuple,
                  frac: int) -> AShare:
    """Evaluate sum(coeffs[i] * x^i) at fixed-point precision frac.

    Powers are truncated back to frac as they are built; coefficient
    products stay at doubled precision and are summed there, so a single
    final truncation finishes the job.
    """
    degree = len(coeffs) - 1
    powers: dict[int, AShare] = {1: x}
    for i in range(2, degree + 1):
        powers[i] = truncate(session, mul(session, powers[i - 1], x), frac)

    acc: AShare | None = None
    for i in range(1, degree + 1):
        if coeffs[i] == 0:
            continue
        term = scale_fixed(session, powers[i], coeffs[i], frac)
        acc = term if acc is None else acc + term
    if acc is None:
        acc = AShare(np.zeros(x.shape, dtype=ring.U64), x.width, x.frac + frac)
    acc = add_const(session, acc, float(coeffs[0]))
    return truncate(session, acc, frac)


def evaluate_square_completed(session: PartySession, x: AShare, lead_shift: int,
                              t3: float, t2: float, lin_coeff: float,
                              const_coeff: float, frac: int) -> AShare:
    """Evaluate k4*(((x+t3)^2+t2)^2 + t1*x + t0) for k4 = 2^-lead_shift.

    The leading coefficient is folded into the truncation of the second
    square, so the whole quartic costs two multiplications and one
    scaling. ``lin_coeff``/``const_coeff`` are the already-multiplied
    k4*t1 and k4*t0.
    """
    u = add_const(session, x, t3)
    u2 = truncate(session, mul(session, u, u), frac)
    v = add_const(session, u2, t2)
    sq = mul(session, v, v)  # frac doubled
    lead = truncate(session, sq, lead_shift, out_frac=sq.frac)
    lin = scale_fixed(session, x, lin_coeff, frac)
    acc = add_const(session, lead + lin, const_coeff)
    return truncate(session, acc, frac)


def lmo(session: PartySession, bits: BShare) -> BShare:
    """Leftmost-one map over the trailing axis: one-hot at the most
    significant set bit, all zeros for zero input.

    Log-depth suffix OR, then each position keeps its bit only where the
    next position's OR is clear.
    """
    m = bits.shape[-1]
    y = bits.bits.copy()
    shift = 1
    while shift < m:
        lo = y[..., :m - shift]
        hi = y[..., shift:]
        # OR via a ^ b ^ (a AND b)
        anded = and_gate(session, BShare(lo.copy()), BShare(hi.copy())).bits
        y[..., :m - shift] = lo ^ hi ^ anded
        shift *= 2
    above = np.concatenate([y[..., 1:], np.zeros_like(y[..., :1])], axis=-1)
    return BShare(y ^ above)


def max_vec(session: PartySession, x: AShare) -> AShare:
    """Maximum over the trailing axis via a comparison tournament.

    ceil(log2 D) levels; each level batches its comparisons and its
    bit-multiplex into single protocol calls.
    """
    cur = x
    while cur.shape[-1] > 1:
        d = cur.shape[-1]
        half = d // 2
        u = cur[..., :half]
        v = cur[..., half:2 * half]
        rest = cur[..., 2 * half:]
        b = gt(session, u, v)
        s = bit2a(session, b, x.width)
        winner = v + mul(session, s, u - v)
        cur = AShare(np.concatenate([winner.values, rest.values], axis=-1),
                     x.width, x.frac)
    return cur[..., 0]
