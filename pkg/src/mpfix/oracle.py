"""Plaintext references the secure ops are checked against.

Ring ops get exact integer references; fixed-point functions get plain
double-precision math. Error metrics: rel_err is the usual relative
error; err_scaled switches to absolute once the reference drops below
one, which keeps tiny outputs (quantized to a couple of ulps) from
swamping the statistic.
"""

from __future__ import annotations

import numpy as np

from . import ring


def softmax_ref(x: np.ndarray, base2: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp2(shifted) if base2 else np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_ref(q: np.ndarray, k_scaled: np.ndarray, v: np.ndarray) -> np.ndarray:
    # k_scaled already carries any log2(e)/sqrt(d) folding, so base-2 it is
    scores = q @ k_scaled.swapaxes(-1, -2)
    return softmax_ref(scores, base2=True) @ v


def mlp_ref(x: np.ndarray, layers) -> np.ndarray:
    h = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(layers):
        h = h @ layer.weight
        if layer.bias is not None:
            h = h + layer.bias
        if i + 1 < len(layers):
            h = np.maximum(h, 0.0)
    return h


def _signed(v, width):
    return ring.to_signed(np.asarray(v, dtype=np.uint64), width)


_RING_OPS = {
    "add": lambda d: ring.add(d["x"], d["y"], d["width"]),
    "sub": lambda d: ring.sub(d["x"], d["y"], d["width"]),
    "mul": lambda d: ring.mul(d["x"], d["y"], d["width"]),
    "matmul": lambda d: ring.matmul(d["x"], d["y"], d["width"]),
    "and": lambda d: (np.asarray(d["x"]) & np.asarray(d["y"])).astype(np.uint8),
    "xor": lambda d: (np.asarray(d["x"]) ^ np.asarray(d["y"])).astype(np.uint8),
    "bit2a": lambda d: np.asarray(d["x"], dtype=np.uint64),
    "decompose": lambda d: ring.bits_of(d["x"], d["width"]),
    "compose": lambda d: ring.bits_to_uint(d["x"], d["width"]),
    "gt": lambda d: (_signed(d["x"], d["width"]) > _signed(d["y"], d["width"])).astype(np.uint8),
    "truncate": lambda d: _signed(d["x"], d["width"]) >> d["f"],
    "lmo": lambda d: _lmo_ref(d["x"]),
    "binary_add": lambda d: ring.add(d["x"], d["y"], d["width"]),
}

_REAL_OPS = {
    "reciprocal": lambda d: 1.0 / np.asarray(d["x"], dtype=np.float64),
    "exponentiation": lambda d: np.exp(np.asarray(d["x"], dtype=np.float64)),
    "baseline_exp": lambda d: np.exp(np.asarray(d["x"], dtype=np.float64)),
    "attention_exp": lambda d: np.exp2(np.asarray(d["x"], dtype=np.float64)),
    "logarithm": lambda d: np.log(np.asarray(d["x"], dtype=np.float64)),
    "relu": lambda d: np.maximum(np.asarray(d["x"], dtype=np.float64), 0.0),
    "softmax": lambda d: softmax_ref(d["x"], d.get("base2", False)),
    "attention": lambda d: attention_ref(d["q"], d["k"], d["v"]),
    "mlp": lambda d: mlp_ref(d["x"], d["layers"]),
}


def _lmo_ref(bits: np.ndarray) -> np.ndarray:
    """One-hot marker of the most significant set bit, LSB-first."""
    b = np.asarray(bits, dtype=np.uint8)
    out = np.zeros_like(b)
    rev = b[..., ::-1]
    idx = np.argmax(rev, axis=-1)
    top = b.shape[-1] - 1 - idx
    any_set = rev.max(axis=-1) > 0
    grid = np.indices(top.shape)
    out[(*grid, top)] = any_set.astype(np.uint8)
    return out


def oracle_eval(op: str, inputs: dict) -> np.ndarray:
    """Reference output for a named op; raises on unknown names."""
    fn = _RING_OPS.get(op) or _REAL_OPS.get(op)
    if fn is None:
        raise ValueError(f"no oracle for op {op!r}")
    return fn(inputs)


# ---------------------------------------------------------------------------
# error metrics

def abs_err(y, ref):
    return np.abs(np.asarray(y, dtype=np.float64) - np.asarray(ref, dtype=np.float64))


def rel_err(y, ref):
    ref = np.asarray(ref, dtype=np.float64)
    return abs_err(y, ref) / np.abs(ref)


def err_scaled(y, ref):
    """|y - ref| / max(1, |ref|): relative above 1, absolute below."""
    ref = np.asarray(ref, dtype=np.float64)
    return abs_err(y, ref) / np.maximum(1.0, np.abs(ref))


def mse(y, ref):
    return float(np.mean(abs_err(y, ref) ** 2))


def summarize_errors(y, ref) -> dict:
    a = abs_err(y, ref)
    s = err_scaled(y, ref)
    return {
        "max_abs": float(a.max()),
        "mean_abs": float(a.mean()),
        "max_scaled": float(s.max()),
        "mean_scaled": float(s.mean()),
    }
