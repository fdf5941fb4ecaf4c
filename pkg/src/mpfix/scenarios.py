"""Benchmark scenarios: deterministic inputs, secure run, oracle check.

Every scenario function runs identically on each party. Inputs are
derived from the shared seed, so each party can compute the full
plaintext locally and emit the same oracle comparison; the protocol's
privacy story is not the harness's concern. All randomness flows
through Philox generators keyed off (seed, label) digests: re-running a
config byte-for-byte reproduces every record.

Each function returns a list of JSON-ready result records. Op-count and
byte assertions in the acceptance suite read the metric scopes
established here, so scope names are part of the contract.
"""

from __future__ import annotations

import hashlib
import tempfile

import numpy as np

from . import oracle, ring
from .config import ScenarioConfig
from .nonlinear import (
    DEFAULT_PARAMS,
    LN2,
    LOG2_E,
    attention_exp,
    baseline_exp,
    exponentiation,
    logarithm,
    reciprocal,
)
from .nn import (
    AttentionDims,
    LinearLayer,
    attention_block,
    load_tensor,
    mlp_forward,
    save_tensor,
    softmax,
)
from .protocols import mul
from .session import PartySession
from .sharing import AShare, BShare


def _label_rng(cfg: ScenarioConfig, label: str) -> np.random.Generator:
    tag = hashlib.sha256(f"{cfg.seed}:{label}".encode()).digest()
    key = np.frombuffer(tag[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _share_ring(session: PartySession, cfg: ScenarioConfig, label: str,
                enc: np.ndarray, width: int, frac: int = 0) -> AShare:
    """Deterministically split a public ring tensor into additive shares."""
    rng = _label_rng(cfg, "share:" + label)
    parts = [ring.random_elems(rng, enc.shape, width)
             for _ in range(session.n_parties - 1)]
    first = enc
    for part in parts:
        first = ring.sub(first, part, width)
    mine = ([first] + parts)[session.party]
    return AShare(mine.copy(), width, frac)


def share_floats(session: PartySession, cfg: ScenarioConfig, label: str,
                 values, width: int, frac: int) -> tuple[AShare, np.ndarray]:
    """Quantize, share, and return (share, dequantized plaintext)."""
    arr = np.asarray(values, dtype=np.float64)
    enc = ring.encode(arr, width, frac)
    sh = _share_ring(session, cfg, label, enc, width, frac)
    return sh, ring.decode(enc, width, frac)


def _share_bits(session: PartySession, cfg: ScenarioConfig, label: str,
                bits: np.ndarray) -> BShare:
    rng = _label_rng(cfg, "share:" + label)
    parts = [ring.random_bits(rng, bits.shape)
             for _ in range(session.n_parties - 1)]
    first = bits.astype(np.uint8)
    for part in parts:
        first = first ^ part
    return BShare(([first] + parts)[session.party].copy())


def _open_fixed(session: PartySession, x: AShare) -> np.ndarray:
    return ring.decode(session.open_arith(x), x.width, x.frac)


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


# ---------------------------------------------------------------------------
# nonlinear-sweep

def _sweep_block(session, cfg, name, op, xs, width, frac, ref_name=None):
    sh, xq = share_floats(session, cfg, name, xs, width, frac)
    with session.scope(name):
        y = op(session, sh)
    got = _open_fixed(session, y)
    ref = oracle.oracle_eval(ref_name or name, {"x": xq})
    stats = oracle.summarize_errors(got, ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        stats["max_rel"] = float(np.max(oracle.rel_err(got, ref)))
    return {
        "record": "result",
        "name": name,
        "width": width,
        "frac": frac,
        "x": _floats(xq),
        "err_scaled": _floats(oracle.err_scaled(got, ref)),
        "stats": stats,
    }, got, ref, xq


def scenario_nonlinear_sweep(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    records = []
    pts = int(cfg.params.get("points", 160))
    p = cfg.frac

    mags = np.logspace(-8.0, 8.0, pts, base=2.0)
    rec, *_ = _sweep_block(session, cfg, "reciprocal",
                           lambda s, x: reciprocal(s, x),
                           np.concatenate([mags, -mags]), 64, p)
    records.append(rec)

    xs_exp = np.linspace(-16.0, 16.0, 2 * pts + 1)
    rec, *_ = _sweep_block(session, cfg, "exponentiation",
                           lambda s, x: exponentiation(s, x), xs_exp, 64, p)
    records.append(rec)

    rec, got, ref, xq = _sweep_block(session, cfg, "logarithm",
                                     lambda s, x: logarithm(s, x), mags, 64, p)
    rec["stats"]["max_abs_err"] = float(np.max(oracle.abs_err(got, ref)))
    records.append(rec)

    records.append(_agreement_block(session, cfg))
    records.extend(_baseline_block(session, cfg))
    records.append(_opcount_block(session, cfg))
    return records


def _agreement_block(session, cfg) -> dict:
    # both exponentials on their shared domain: 2^x vs e^(x ln 2)
    p14 = 14
    xs = np.linspace(-13.75, -0.01, 64)
    a_sh, a_q = share_floats(session, cfg, "agree_att", xs, 32, p14)
    e_sh, e_q = share_floats(session, cfg, "agree_exp", a_q * LN2, 64, p14)
    with session.scope("agree"):
        ya = attention_exp(session, a_sh)
        ye = exponentiation(session, e_sh)
    got_a = _open_fixed(session, ya)
    got_e = _open_fixed(session, ye)
    ref = np.exp2(a_q)
    tol = np.maximum(np.abs(ref) * 2.0 ** -10, 2.0 ** (-p14 + 2))
    return {
        "record": "result",
        "name": "exp_agreement",
        "frac": p14,
        "x": _floats(a_q),
        "abs_gap": _floats(np.abs(got_a - got_e)),
        "stats": {
            "max_gap_over_tol": float(np.max(np.abs(got_a - got_e) / tol)),
            "max_abs_gap": float(np.max(np.abs(got_a - got_e))),
        },
    }


def _baseline_block(session, cfg) -> list[dict]:
    # 31-bit/f16 narrow config wraps its integer window at x=12; the
    # wide default does not. overflow = scaled error above one half.
    p16 = 16
    xs = np.concatenate([np.linspace(-12.0, 10.0, 45), [12.0]])
    out = []
    for name, op in (("baseline_exp", baseline_exp),
                     ("exponentiation_wide", exponentiation)):
        sh, xq = share_floats(session, cfg, name, xs, 64, p16)
        with session.scope(name):
            y = op(session, sh)
        got = _open_fixed(session, y)
        ref = np.exp(xq)
        err = oracle.err_scaled(got, ref)
        flagged = [float(x) for x, e in zip(xq, err) if e > 0.5]
        out.append({
            "record": "result",
            "name": name,
            "frac": p16,
            "x": _floats(xq),
            "err_scaled": _floats(err),
            "overflow_flagged": flagged,
            "stats": {"max_err_scaled_unflagged": float(
                np.max(np.where(err > 0.5, 0.0, err)))},
        })
    return out


def _opcount_block(session, cfg) -> dict:
    # per-call op budget of the two exponentials at the attention config
    p14 = 14
    xs = np.linspace(-5.0, -0.125, 8)
    e_sh, _ = share_floats(session, cfg, "ops_exp", xs * LN2, 64, p14)
    a_sh, _ = share_floats(session, cfg, "ops_att", xs, 32, p14)
    with session.scope("opcount"):
        with session.scope("exponentiation"):
            exponentiation(session, e_sh)
        with session.scope("attention_exp"):
            attention_exp(session, a_sh)
    ce = session.metrics.scoped("opcount/exponentiation").as_dict()
    ca = session.metrics.scoped("opcount/attention_exp").as_dict()
    return {
        "record": "result",
        "name": "op_budget",
        "exponentiation": ce,
        "attention_exp": ca,
        "savings": {
            "mul_count": ce["mul_count"] - ca["mul_count"],
            "scale_count": ce["scale_count"] - ca["scale_count"],
            "trunc_count": ce["trunc_count"] - ca["trunc_count"],
        },
    }


# ---------------------------------------------------------------------------
# softmax-bench

def _softmax_batch(session, cfg, label, rows, cols, frac, spread):
    rng = _label_rng(cfg, label)
    logits = rng.normal(0.0, spread, size=(rows, cols))
    # a flat row and a one-winner row ride along as sanity probes
    flat = np.zeros((1, cols))
    dom = np.zeros((1, cols))
    dom[0, 0] = 10.0
    xs = np.concatenate([logits, flat, dom], axis=0)

    sh, xq = share_floats(session, cfg, label, xs, 64, frac)
    with session.scope(label):
        y = softmax(session, sh)
    got = _open_fixed(session, y)
    ref = oracle.softmax_ref(xq)

    sums = got.sum(axis=-1)
    rand_sums = sums[:rows]
    return {
        "record": "result",
        "name": label,
        "frac": frac,
        "rows": rows,
        "cols": cols,
        "row_sums": _floats(rand_sums),
        "stats": {
            "rowsum_min": float(rand_sums.min()),
            "rowsum_max": float(rand_sums.max()),
            "flat_max_dev": float(np.max(np.abs(got[rows] - 1.0 / cols))),
            "dominant_top": float(got[rows + 1, 0]),
            "max_abs_err": float(np.max(oracle.abs_err(got, ref))),
            "mse": oracle.mse(got, ref),
        },
    }


def scenario_softmax_bench(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    rows = int(cfg.params.get("rows", 1000))
    cols = int(cfg.params.get("cols", 196))
    rows_alt = int(cfg.params.get("rows_alt", 200))
    records = [_softmax_batch(session, cfg, "softmax_main", rows, cols,
                              cfg.frac, spread=6.0)]
    if rows_alt:
        records.append(_softmax_batch(session, cfg, "softmax_f14", rows_alt,
                                      cols, 14, spread=6.0))
    return records


# ---------------------------------------------------------------------------
# attention-bench

def scenario_attention_bench(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    dims = AttentionDims(int(cfg.params.get("d1", 196)),
                         int(cfg.params.get("d2", 196)),
                         int(cfg.params.get("d3", 64)),
                         int(cfg.params.get("heads", 4)))
    p = cfg.frac
    fold = LOG2_E / np.sqrt(dims.d3)   # score scale, folded into K

    heads, refs = [], []
    for h in range(dims.heads):
        rng = _label_rng(cfg, f"att_head{h}")
        q = rng.normal(0.0, 1.0, size=(dims.d1, dims.d3))
        k = rng.normal(0.0, 1.0, size=(dims.d2, dims.d3))
        v = rng.normal(0.0, 0.5, size=(dims.d2, dims.d3))
        q_sh, qq = share_floats(session, cfg, f"att_q{h}", q, 64, p)
        k_sh, kq = share_floats(session, cfg, f"att_k{h}", k * fold, 64, p)
        v_sh, vq = share_floats(session, cfg, f"att_v{h}", v, 64, p)
        heads.append((q_sh, k_sh, v_sh))
        refs.append(oracle.attention_ref(qq, kq, vq))
    ref = np.stack(refs)

    with session.scope("naive"):
        y_naive = attention_block(session, heads, optimized=False)
    with session.scope("optimized"):
        y_opt = attention_block(session, heads, optimized=True)
    got_n = _open_fixed(session, y_naive)
    got_o = _open_fixed(session, y_opt)

    elems_n = session.metrics.scoped("naive/normalize").as_dict()["mul_elems"]
    elems_o = session.metrics.scoped("optimized/normalize").as_dict()["mul_elems"]
    return [{
        "record": "result",
        "name": "attention",
        "dims": [dims.d1, dims.d2, dims.d3, dims.heads],
        "frac": p,
        "stats": {
            "mse_naive": oracle.mse(got_n, ref),
            "mse_optimized": oracle.mse(got_o, ref),
            "max_cross_dev": float(np.max(np.abs(got_n - got_o))),
            "normalize_elems_naive": elems_n,
            "normalize_elems_optimized": elems_o,
            "downsize_ratio": elems_n / elems_o,
        },
    }]


# ---------------------------------------------------------------------------
# mlp-simple

def scenario_mlp_simple(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    batch = int(cfg.params.get("batch", 200))
    d_in = int(cfg.params.get("in_dim", 784))
    d_h = int(cfg.params.get("hidden", 128))
    d_out = int(cfg.params.get("out_dim", 10))
    p = cfg.frac

    rng = _label_rng(cfg, "mlp_weights")
    shapes = [(d_in, d_h), (d_h, d_h), (d_h, d_out)]
    layers = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, (a, b) in enumerate(shapes):
            w = rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b))
            bias = rng.normal(0.0, 0.1, size=b)
            # weights go to disk and come back, so both the shares and
            # the reference see the same quantization
            save_tensor(f"{tmp}/w{i}.ten", w, 64, p)
            save_tensor(f"{tmp}/b{i}.ten", bias, 64, p)
            wq, _, _ = load_tensor(f"{tmp}/w{i}.ten")
            bq, _, _ = load_tensor(f"{tmp}/b{i}.ten")
            layers.append(LinearLayer(wq, bq))

    xin = _label_rng(cfg, "mlp_inputs").normal(0.0, 1.0, size=(batch, d_in))
    x_sh, xq = share_floats(session, cfg, "mlp_x", xin, 64, p)

    with session.scope("mlp"):
        y = mlp_forward(session, x_sh, layers)
    got = _open_fixed(session, y)
    ref = oracle.mlp_ref(xq, layers)

    agree = float(np.mean(got.argmax(axis=-1) == ref.argmax(axis=-1)))
    return [{
        "record": "result",
        "name": "mlp",
        "dims": [d_in, d_h, d_h, d_out],
        "batch": batch,
        "frac": p,
        "logit_dev": _floats(np.max(np.abs(got - ref), axis=-1)),
        "stats": {
            "argmax_agreement": agree,
            "max_logit_dev": float(np.max(np.abs(got - ref))),
        },
    }]


# ---------------------------------------------------------------------------
# scale-parties

def scenario_scale_parties(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    count = int(cfg.params.get("count", 4096))
    reps = int(cfg.params.get("reps", 4))
    records = []
    for width in (64, 32):
        rng = _label_rng(cfg, f"sp_w{width}")
        scope = f"mul_w{width}"
        with session.scope(scope):
            prods = []
            for r in range(reps):
                xe = ring.random_elems(rng, (count,), width)
                ye = ring.random_elems(rng, (count,), width)
                x = _share_ring(session, cfg, f"sp_x{width}_{r}", xe, width)
                y = _share_ring(session, cfg, f"sp_y{width}_{r}", ye, width)
                z = mul(session, x, y)
                prods.append((z, ring.mul(xe, ye, width)))
        exact = all(np.array_equal(session.open_arith(z), ref)
                    for z, ref in prods)
        sent = session.metrics.scoped(scope).as_dict()["bytes"]
        n1 = session.n_parties - 1
        records.append({
            "record": "result",
            "name": scope,
            "width": width,
            "count": count,
            "reps": reps,
            "products_exact": bool(exact),
            "bytes_sent": sent,
            "bits_per_elem_per_mul": sent * 8 / (reps * count),
            "expected_bits_per_elem_per_mul": 2 * width * n1,
        })
    return records


# ---------------------------------------------------------------------------
# comm-micro

def scenario_comm_micro(session: PartySession, cfg: ScenarioConfig) -> list[dict]:
    sizes = [int(s) for s in cfg.params.get("sizes", [1024, 65536, 1048576])]
    records = []
    for size in sizes:
        rng = _label_rng(cfg, f"cm_{size}")
        bits = ring.random_bits(rng, (size * 8,))
        sh = _share_bits(session, cfg, f"cm_{size}", bits)
        scope = f"open_{size}"
        with session.scope(scope):
            got = session.open_bits(sh)
        counters = session.metrics.scoped(scope).as_dict()
        records.append({
            "record": "result",
            "name": scope,
            "payload_bytes": size,
            "match": bool(np.array_equal(got, bits)),
            "digest": hashlib.sha256(got.tobytes()).hexdigest(),
            "bytes_sent": counters["bytes"],
            "rounds": counters["rounds"],
        })
    return records


SCENARIOS = {
    "nonlinear-sweep": scenario_nonlinear_sweep,
    "softmax-bench": scenario_softmax_bench,
    "attention-bench": scenario_attention_bench,
    "mlp-simple": scenario_mlp_simple,
    "scale-parties": scenario_scale_parties,
    "comm-micro": scenario_comm_micro,
}
