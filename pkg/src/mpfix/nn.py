"""Shared-tensor building blocks for small neural networks.

The softmax pipeline follows the usual secure-inference shape: shift
every row so the maximum sits just below zero, exponentiate, then
normalize by a reciprocal of the row sum. Exponentials run in base 2;
callers that want natural-exp semantics either let softmax() fold the
log2(e) factor in, or pre-fold it into the weights that produce the
logits (see fold_base2) so the online phase never pays for it.

Attention comes in two variants that compute the same function:

* naive:      out = (E * R) @ V   -- normalize first, then project
* optimized:  out = R * (E @ V)   -- project first, normalize after

R is constant along the contraction axis, so the element-wise multiply
can ride through the matrix product. That shrinks it from one multiply
per score (D1 x D2) to one per output element (D1 x D3), a 3x saving
at the 196/196/64 geometry this was tuned for.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ring
from .session import PartySession
from .sharing import AShare, add_public, public_ashare
from .protocols import batch_matmul, bit2a, gt, max_vec, mul, scale_fixed, truncate
from .nonlinear import (
    ApproxParams,
    DEFAULT_PARAMS,
    LOG2_E,
    attention_exp,
    reciprocal,
)


@dataclass(frozen=True)
class AttentionDims:
    d1: int          # queries
    d2: int          # keys
    d3: int          # value / output width
    heads: int = 1


@dataclass(frozen=True)
class LinearLayer:
    """Public (plaintext) affine layer; only the activations are shared."""

    weight: np.ndarray   # (in_dim, out_dim), float
    bias: Optional[np.ndarray] = None


def fold_base2(layer: LinearLayer) -> LinearLayer:
    """Scale a logit-producing layer by log2(e) ahead of time.

    A folded layer followed by a base-2 exponential equals the original
    layer followed by a natural exponential, with no extra online cost.
    """
    bias = None if layer.bias is None else layer.bias * LOG2_E
    return LinearLayer(layer.weight * LOG2_E, bias)


def narrow(x: AShare, width: int) -> AShare:
    """Re-interpret shares in a smaller ring (value must fit signed)."""
    if width > x.width:
        raise ValueError(f"cannot widen {x.width} -> {width}")
    if width == x.width:
        return x.copy()
    return AShare(ring.cast_down(x.values, x.width, width), width, x.frac)


def transpose(x: AShare) -> AShare:
    return AShare(np.ascontiguousarray(x.values.swapaxes(-1, -2)),
                  x.width, x.frac)


def _stack(shares: Sequence[AShare]) -> AShare:
    return AShare(np.stack([s.values for s in shares]),
                  shares[0].width, shares[0].frac)


def _bcast_last(r: AShare, d: int) -> AShare:
    v = np.broadcast_to(r.values[..., None], r.shape + (d,))
    return AShare(np.ascontiguousarray(v), r.width, r.frac)


def relu(session: PartySession, x: AShare) -> AShare:
    """max(x, 0) as sign-bit multiplex; needs no truncation."""
    zero = public_ashare(0, x.width, x.frac, session.party, shape=x.shape)
    b = gt(session, x, zero)
    s = bit2a(session, b, x.width)
    return mul(session, s, x)


def maxcut(session: PartySession, x: AShare, cast_width: Optional[int] = 32,
           eps_ulps: int = 1) -> AShare:
    """Shift each trailing-axis row below zero: x - max(x) - eps.

    Shares are first narrowed to cast_width (comparisons get cheaper;
    pass None to stay at the input width). Every output is <= -eps, so
    a following base-2 exponential sees only its safe negative domain.
    """
    if cast_width is not None and cast_width < x.width:
        x = narrow(x, cast_width)
    m = max_vec(session, x)
    shifted = x - _bcast_last(m, x.shape[-1])
    return add_public(shifted, -eps_ulps, session.party)


def softmax_parts(session: PartySession, x: AShare,
                  params: ApproxParams = DEFAULT_PARAMS,
                  base2: bool = False,
                  cast_width: Optional[int] = 32) -> tuple[AShare, AShare]:
    """Exponentials and row-sum reciprocals, before normalization.

    Returns (e, r): e has x's shape, r drops the last axis. Split out
    so the attention paths can place the normalizing multiply on
    whichever side of the output matmul is cheaper.
    """
    p = x.frac
    if not base2:
        with session.scope("rescale"):
            x = truncate(session, scale_fixed(session, x, LOG2_E), p)
    with session.scope("maxcut"):
        xm = maxcut(session, x, cast_width=cast_width)
    with session.scope("exp"):
        e = attention_exp(session, xm, params)
    with session.scope("sum_recip"):
        total = ring.wrap(np.add.reduce(e.values, axis=-1), e.width)
        r = reciprocal(session, AShare(total, e.width, e.frac), params)
    return e, r


def softmax(session: PartySession, x: AShare,
            params: ApproxParams = DEFAULT_PARAMS,
            base2: bool = False,
            cast_width: Optional[int] = 32) -> AShare:
    """Row-wise softmax over the trailing axis."""
    e, r = softmax_parts(session, x, params, base2, cast_width)
    with session.scope("normalize"):
        prod = mul(session, e, _bcast_last(r, e.shape[-1]))
        return truncate(session, prod, e.frac)


def attention_block(session: PartySession,
                    heads: Sequence[tuple[AShare, AShare, AShare]],
                    params: ApproxParams = DEFAULT_PARAMS,
                    optimized: bool = False,
                    cast_width: Optional[int] = 32) -> AShare:
    """Scaled dot-product attention over a list of (Q, K, V) heads.

    Expects K pre-scaled in plaintext with log2(e)/sqrt(D3) so the
    score rows are base-2 logits; all heads' matmuls batch into single
    rounds. Returns stacked outputs of shape (H, D1, D3).
    """
    if not heads:
        raise ValueError("need at least one head")
    p = heads[0][0].frac

    with session.scope("scores"):
        raw = batch_matmul(session, [(q, transpose(k)) for q, k, _ in heads])
        scores = truncate(session, _stack(raw), p)

    with session.scope("softmax"):
        e, r = softmax_parts(session, scores, params, base2=True,
                             cast_width=cast_width)

    n_heads = len(heads)
    if optimized:
        with session.scope("out_matmul"):
            pairs = [(e[h], heads[h][2]) for h in range(n_heads)]
            ev = truncate(session, _stack(batch_matmul(session, pairs)), p)
        with session.scope("normalize"):
            out = mul(session, ev, _bcast_last(r, ev.shape[-1]))
            return truncate(session, out, p)

    with session.scope("normalize"):
        pm = truncate(session, mul(session, e, _bcast_last(r, e.shape[-1])), p)
    with session.scope("out_matmul"):
        pairs = [(pm[h], heads[h][2]) for h in range(n_heads)]
        return truncate(session, _stack(batch_matmul(session, pairs)), p)


def linear_layer(session: PartySession, x: AShare, layer: LinearLayer) -> AShare:
    """x @ W + b with public W, b: a purely local product plus one truncation."""
    w, p = x.width, x.frac
    wq = ring.encode(layer.weight, w, p)
    acc = AShare(ring.matmul(x.values, wq, w), w, 2 * p)
    if layer.bias is not None:
        acc = add_public(acc, ring.encode(layer.bias, w, 2 * p), session.party)
    return truncate(session, acc, p)


def mlp_forward(session: PartySession, x: AShare,
                layers: Sequence[LinearLayer]) -> AShare:
    for i, layer in enumerate(layers):
        with session.scope(f"layer{i}"):
            x = linear_layer(session, x, layer)
            if i + 1 < len(layers):
                x = relu(session, x)
    return x


# ---------------------------------------------------------------------------
# tensor files: fixed-point weights on disk

_TEN_MAGIC = b"MPFXTEN1"


def save_tensor(path, values: np.ndarray, width: int, frac: int) -> None:
    """Write a float tensor as fixed-point words.

    Layout: magic, width:u16, frac:u16, ndim:u32, dims:u64 each, then
    the two's-complement words as little-endian u64.
    """
    arr = np.asarray(values, dtype=np.float64)
    enc = ring.encode(arr, width, frac)
    with open(path, "wb") as fh:
        fh.write(_TEN_MAGIC)
        fh.write(struct.pack("<HHI", width, frac, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(np.ascontiguousarray(enc, dtype="<u8").tobytes())


def load_tensor(path) -> tuple[np.ndarray, int, int]:
    """Read a tensor file back as (floats, width, frac).

    The floats are the dequantized fixed-point values, so a plaintext
    reference built from them matches what the shares actually encode.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _TEN_MAGIC:
        raise ValueError(f"{path}: not a tensor file")
    width, frac, ndim = struct.unpack_from("<HHI", blob, 8)
    dims = struct.unpack_from(f"<{ndim}Q", blob, 16)
    count = int(np.prod(dims)) if ndim else 1
    enc = np.frombuffer(blob, dtype="<u8", count=count,
                        offset=16 + 8 * ndim).reshape(dims)
    return ring.decode(enc.astype(np.uint64), width, frac), width, frac
