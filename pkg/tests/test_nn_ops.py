"""Composite layers: relu, max-shift, softmax, attention, linear stacks."""

import os
import tempfile

import numpy as np
import pytest

from helpers import run_mpc, deal_fixed, opened_fixed
from mpfix.nn import (LinearLayer, attention_block, linear_layer, maxcut,
                      mlp_forward, relu, save_tensor, load_tensor, softmax,
                      softmax_parts)
from mpfix.nonlinear import DEFAULT_PARAMS, LOG2_E
from mpfix.oracle import attention_ref, mlp_ref, softmax_ref


def test_relu_exact_on_grid():
    def fn(session):
        xs = np.linspace(-4, 4, 33)
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, relu(session, x)), xq

    for got, xq in run_mpc(fn, 3):
        assert np.array_equal(got, np.maximum(xq, 0))


def test_maxcut_shifts_rows_nonpositive():
    def fn(session):
        rng = np.random.default_rng(1)
        xs = rng.normal(0, 5, (5, 11))
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, maxcut(session, x)), xq

    for got, xq in run_mpc(fn, 2):
        assert got.max() <= 0
        want_diff = xq - xq.max(axis=-1, keepdims=True)
        got_diff = got - got.max(axis=-1, keepdims=True)
        assert np.abs(want_diff - got_diff).max() < 2 ** -20


def test_softmax_rows_sum_to_one():
    def fn(session):
        rng = np.random.default_rng(2)
        xs = rng.normal(0, 6, (12, 64))
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, softmax(session, x, DEFAULT_PARAMS)), xq

    for got, xq in run_mpc(fn, 2):
        assert np.abs(got.sum(-1) - 1).max() < 1e-3
        assert np.abs(got - softmax_ref(xq)).max() < 1e-4


def test_softmax_parts_compose_to_softmax():
    def fn(session):
        rng = np.random.default_rng(3)
        xs = rng.normal(0, 3, (6, 32))
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        e, r = softmax_parts(session, x, DEFAULT_PARAMS)
        return opened_fixed(session, e), opened_fixed(session, r), xq

    for e, r, xq in run_mpc(fn, 2):
        composed = e * r[..., None]
        assert np.abs(composed - softmax_ref(xq)).max() < 1e-4


def test_row_scale_commutes_only_through_output():
    # the size-reduction trick: scaling rows of E commutes with E@V as
    # R*(E@V); the literal swap E@(R*V) needs R on the contraction axis
    rng = np.random.default_rng(4)
    E = rng.normal(size=(6, 8))
    V = rng.normal(size=(8, 3))
    r_rows = rng.uniform(0.5, 2.0, size=(6, 1))
    assert np.allclose((r_rows * E) @ V, r_rows * (E @ V))
    r_contr = rng.uniform(0.5, 2.0, size=(1, 8))
    assert np.allclose((r_contr * E) @ V, E @ (r_contr.T * V))
    assert not np.allclose((r_rows * E) @ V, E @ (r_rows.mean() * V))


@pytest.mark.parametrize("optimized", [False, True])
def test_attention_small_vs_reference(optimized):
    def fn(session):
        rng = np.random.default_rng(5)
        q = rng.normal(0, 1, (10, 6))
        k = rng.normal(0, 1, (10, 6))
        v = rng.normal(0, 0.5, (10, 6))
        fold = LOG2_E / np.sqrt(6)
        qs, qq = deal_fixed(session, q, 64, 14, tag=0)
        ks, kq = deal_fixed(session, k * fold, 64, 14, tag=1)
        vs, vq = deal_fixed(session, v, 64, 14, tag=2)
        out = attention_block(session, [(qs, ks, vs)], DEFAULT_PARAMS,
                              optimized=optimized)
        return opened_fixed(session, out)[0], attention_ref(qq, kq, vq)

    for got, ref in run_mpc(fn, 2):
        assert np.abs(got - ref).max() < 3e-3


def test_attention_four_heads_batched():
    def fn(session):
        rng = np.random.default_rng(6)
        heads, refs = [], []
        for h in range(4):
            q = rng.normal(0, 1, (8, 8))
            k = rng.normal(0, 1, (8, 8))
            v = rng.normal(0, 0.5, (8, 4))
            fold = LOG2_E / np.sqrt(8)
            qs, qq = deal_fixed(session, q, 64, 14, tag=10 + 3 * h)
            ks, kq = deal_fixed(session, k * fold, 64, 14, tag=11 + 3 * h)
            vs, vq = deal_fixed(session, v, 64, 14, tag=12 + 3 * h)
            heads.append((qs, ks, vs))
            refs.append(attention_ref(qq, kq, vq))
        naive = attention_block(session, heads, DEFAULT_PARAMS, optimized=False)
        opt = attention_block(session, heads, DEFAULT_PARAMS, optimized=True)
        return (opened_fixed(session, naive), opened_fixed(session, opt),
                np.stack(refs))

    for naive, opt, refs in run_mpc(fn, 2):
        assert naive.shape == (4, 8, 4)
        assert np.abs(naive - refs).max() < 3e-3
        assert np.abs(naive - opt).max() <= 2 ** -10


def test_attention_mixed_width_scores():
    # scores and exp on the narrow ring, normalize back on the wide one
    def fn(session):
        rng = np.random.default_rng(7)
        q = rng.normal(0, 1, (8, 4))
        k = rng.normal(0, 1, (8, 4))
        v = rng.normal(0, 0.5, (8, 4))
        fold = LOG2_E / np.sqrt(4)
        qs, _ = deal_fixed(session, q, 64, 14, tag=0)
        ks, _ = deal_fixed(session, k * fold, 64, 14, tag=1)
        vs, _ = deal_fixed(session, v, 64, 14, tag=2)
        narrow = attention_block(session, [(qs, ks, vs)], DEFAULT_PARAMS,
                                 optimized=True, cast_width=32)
        wide = attention_block(session, [(qs, ks, vs)], DEFAULT_PARAMS,
                               optimized=True, cast_width=64)
        return opened_fixed(session, narrow), opened_fixed(session, wide)

    for narrow, wide in run_mpc(fn, 2):
        assert np.abs(narrow - wide).max() <= 2 ** -10


def test_linear_layer_matches_plaintext():
    def fn(session):
        rng = np.random.default_rng(8)
        xs = rng.normal(0, 1, (9, 5))
        layer = LinearLayer(rng.normal(0, 0.5, (5, 3)), rng.normal(0, 0.1, 3))
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, linear_layer(session, x, layer)), xq, layer

    for got, xq, layer in run_mpc(fn, 2):
        want = xq @ layer.weight + layer.bias
        assert np.abs(got - want).max() < 1e-5


def test_mlp_forward_argmax():
    def fn(session):
        rng = np.random.default_rng(9)
        xs = rng.normal(0, 1, (20, 16))
        layers = [LinearLayer(rng.normal(0, 0.25, (16, 12)), rng.normal(0, 0.1, 12)),
                  LinearLayer(rng.normal(0, 0.3, (12, 4)), rng.normal(0, 0.1, 4))]
        x, xq = deal_fixed(session, xs, 64, 23, tag=0)
        return opened_fixed(session, mlp_forward(session, x, layers)), xq, layers

    for got, xq, layers in run_mpc(fn, 2):
        ref = mlp_ref(xq, layers)
        assert np.abs(got - ref).max() < 1e-3
        assert (got.argmax(-1) == ref.argmax(-1)).all()


def test_tensor_file_roundtrip():
    rng = np.random.default_rng(10)
    arr = rng.normal(0, 3, (4, 5, 6))
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "weights.mpft")
        save_tensor(path, arr, width=64, frac=23)
        back, width, frac = load_tensor(path)
        assert (width, frac) == (64, 23)
        assert back.shape == arr.shape
        assert np.abs(back - arr).max() <= 2 ** -23


def test_tensor_file_rejects_garbage():
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "bad.mpft")
        with open(path, "wb") as fh:
            fh.write(b"not a tensor")
        with pytest.raises(ValueError):
            load_tensor(path)
