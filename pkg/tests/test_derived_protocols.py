"""Truncation, scaling, polynomial evaluation, leftmost-one, max."""

import numpy as np
import pytest

from helpers import run_mpc, deal_arith, deal_bits, deal_fixed, opened_fixed
from mpfix import ring
from mpfix.oracle import oracle_eval
from mpfix.protocols import (decompose, evaluate_poly,
                             evaluate_square_completed, lmo, max_vec,
                             scale_fixed, truncate, unsigned_truncate)
from mpfix.nonlinear import EXP2_SQUARE


@pytest.mark.parametrize("f", [1, 16, 23])
def test_truncate_error_at_most_one_ulp(f):
    # stochastic rounding: result is floor(x/2^f) + {0, 1}
    def fn(session):
        rng = np.random.default_rng(100 + f)
        xs = rng.integers(-(1 << 61), 1 << 61, 20000)
        x = deal_arith(session, ring.to_ring(xs, 64), 64, tag=0)
        z = truncate(session, x, f)
        return session.open_arith(z), xs

    for got, xs in run_mpc(fn, 2):
        want = xs >> f
        err = ring.to_signed(got, 64) - want
        assert err.min() >= 0 and err.max() <= 1, (err.min(), err.max())


def test_unsigned_truncate_domain():
    def fn(session):
        rng = np.random.default_rng(200)
        xs = rng.integers(0, 1 << 62, 5000, dtype=np.uint64)
        x = deal_arith(session, xs, 64, tag=0)
        return session.open_arith(unsigned_truncate(session, x, 9)), xs

    for got, xs in run_mpc(fn, 3):
        err = got.astype(np.int64) - (xs >> np.uint64(9)).astype(np.int64)
        assert err.min() >= 0 and err.max() <= 1


def test_scale_fixed_matches_float():
    def fn(session):
        xs = np.linspace(-30, 30, 101)
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        y = scale_fixed(session, x, 1.4426950408889634)
        return opened_fixed(session, truncate(session, y, 23, out_frac=23)), xq

    for got, xq in run_mpc(fn, 2):
        assert np.abs(got - xq * 1.4426950408889634).max() < 2 ** -20


def test_evaluate_poly_vs_polyval():
    coeffs = (0.12, -0.8, 0.5, 1.0)  # ascending

    def fn(session):
        xs = np.linspace(-1.5, 1.5, 61)
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        y = evaluate_poly(session, x, coeffs, 23)
        return opened_fixed(session, y), xq

    for got, xq in run_mpc(fn, 2):
        want = np.polyval(coeffs[::-1], xq)
        assert np.abs(got - want).max() < 1e-5


def test_square_completed_matches_dense():
    sq = EXP2_SQUARE  # two muls + one scale for a full quartic
    k = sq.lead

    def fn(session):
        xs = np.linspace(0.0, 1.0, 33)
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        y = evaluate_square_completed(session, x, sq.lead_shift, sq.t3, sq.t2,
                                      k * sq.t1, k * sq.t0, 23)
        return opened_fixed(session, y), xq

    for got, xq in run_mpc(fn, 2):
        want = np.polyval(sq.as_dense()[::-1], xq)
        assert np.abs(got - want).max() < 1e-5


def test_lmo_exhaustive_l8():
    def fn(session):
        xs = np.arange(256, dtype=np.uint64)
        bits = deal_bits(session, ring.bits_of(xs, 8), tag=0)
        return session.open_bits(lmo(session, bits))

    want = oracle_eval("lmo", {"x": ring.bits_of(np.arange(256, dtype=np.uint64), 8)})
    for got in run_mpc(fn, 2):
        assert np.array_equal(got, want)


def test_lmo_after_decompose():
    def fn(session):
        rng = np.random.default_rng(300)
        xs = rng.integers(1, 1 << 50, 128, dtype=np.uint64)
        x = deal_arith(session, xs, 64, tag=0)
        return session.open_bits(lmo(session, decompose(session, x))), xs

    for got, xs in run_mpc(fn, 3):
        top = np.array([int(v).bit_length() - 1 for v in xs])
        assert np.array_equal(np.argmax(got, axis=-1), top)
        assert got.sum(axis=-1).max() == 1


def test_max_vec_signed():
    def fn(session):
        rng = np.random.default_rng(400)
        xs = rng.normal(0, 20, (40, 13))
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, max_vec(session, x)), xq

    for got, xq in run_mpc(fn, 2):
        assert np.array_equal(got, xq.max(axis=-1))
