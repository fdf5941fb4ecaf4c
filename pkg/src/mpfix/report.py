"""Report IO: line-delimited JSON, summaries, and rendered figures.

A report is a list of flat JSON records (meta, transport, result, comm,
usage). Everything except the transport record is deterministic for a
given config, which is what makes same-seed and cross-transport runs
byte-comparable: strip the transport line and the rest must match.
"""

from __future__ import annotations

import json
import os

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def write_report(path, lines: list[dict]) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def read_report(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                out.append(json.loads(raw))
    return out


def comparable(lines: list[dict]) -> str:
    """Canonical text of everything that must be reproducible."""
    kept = [l for l in lines if l.get("record") != "transport"]
    return "\n".join(json.dumps(l, sort_keys=True) for l in kept)


def results(lines: list[dict], name: str | None = None):
    res = [l for l in lines if l.get("record") == "result"]
    if name is None:
        return res
    for l in res:
        if l.get("name") == name:
            return l
    raise KeyError(f"no result named {name!r} in report")


def summarize(lines: list[dict]) -> str:
    """Human-readable digest of a report."""
    out = []
    meta = next((l for l in lines if l.get("record") == "meta"), {})
    if meta:
        out.append(f"scenario {meta.get('scenario')}  n={meta.get('n_parties')} "
                   f"w={meta.get('width')} f={meta.get('frac')} "
                   f"seed={meta.get('seed')}")
    tr = next((l for l in lines if l.get("record") == "transport"), None)
    if tr:
        out.append(f"transport {tr['kind']}  wall {tr['wall_seconds']}s")
    for r in results(lines):
        stats = r.get("stats", {})
        if stats:
            body = "  ".join(f"{k}={_fmt(v)}" for k, v in sorted(stats.items()))
        else:
            body = "  ".join(f"{k}={_fmt(v)}" for k, v in sorted(r.items())
                             if k not in ("record", "name") and not isinstance(v, list))
        out.append(f"  {r['name']}: {body}")
    for c in (l for l in lines if l.get("record") == "comm"):
        t = c["total"]
        out.append(f"  party {c['party']}: rounds={t['rounds']} bytes={t['bytes']} "
                   f"mul_elems={t['mul_elems']} trunc={t['trunc_count']}")
    return "\n".join(out)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return v


# ---------------------------------------------------------------------------
# figures

def render_figures(lines: list[dict], out_dir) -> list[str]:
    """Render per-scenario plots next to the delimited report."""
    os.makedirs(out_dir, exist_ok=True)
    meta = next((l for l in lines if l.get("record") == "meta"), {})
    scenario = meta.get("scenario", "report")
    written = []

    def save(fig, stem):
        path = os.path.join(out_dir, f"{stem}.png")
        fig.savefig(path, dpi=110, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if scenario == "nonlinear-sweep":
        _sweep_figures(lines, save)
    elif scenario == "softmax-bench":
        _softmax_figures(lines, save)
    elif scenario == "attention-bench":
        _attention_figures(lines, save)
    elif scenario == "mlp-simple":
        _mlp_figures(lines, save)
    elif scenario == "scale-parties":
        _scale_figures(lines, save)
    elif scenario == "comm-micro":
        _comm_figures(lines, save)
    return written


def _sweep_figures(lines, save):
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    for ax, name in zip(axes, ("reciprocal", "exponentiation", "logarithm")):
        try:
            r = results(lines, name)
        except KeyError:
            continue
        x = np.asarray(r["x"])
        e = np.asarray(r["err_scaled"])
        ax.semilogy(x, np.maximum(e, 1e-12), ".", markersize=3)
        ax.set_title(name)
        ax.set_xlabel("x")
        ax.set_ylabel("scaled error")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    save(fig, "sweep_errors")

    try:
        ob = results(lines, "op_budget")
    except KeyError:
        ob = None
    if ob:
        kinds = ("mul_count", "scale_count", "trunc_count")
        ex = [ob["exponentiation"][k] for k in kinds]
        at = [ob["attention_exp"][k] for k in kinds]
        idx = np.arange(len(kinds))
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.bar(idx - 0.18, ex, width=0.36, label="exponentiation")
        ax.bar(idx + 0.18, at, width=0.36, label="attention_exp")
        ax.set_xticks(idx, ["mul", "scale", "trunc"])
        ax.set_ylabel("ops per call")
        ax.legend()
        save(fig, "sweep_op_budget")

    try:
        bl = results(lines, "baseline_exp")
    except KeyError:
        bl = None
    if bl:
        x = np.asarray(bl["x"])
        e = np.maximum(np.asarray(bl["err_scaled"]), 1e-12)
        flagged = set(bl.get("overflow_flagged", []))
        mask = np.array([xx in flagged for xx in bl["x"]])
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        ax.semilogy(x[~mask], e[~mask], ".", label="ok")
        if mask.any():
            ax.semilogy(x[mask], e[mask], "x", color="crimson", label="overflow")
        ax.set_xlabel("x")
        ax.set_ylabel("scaled error")
        ax.legend()
        ax.grid(True, alpha=0.3)
        save(fig, "sweep_baseline_overflow")


def _softmax_figures(lines, save):
    for r in results(lines):
        sums = r.get("row_sums")
        if not sums:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(np.asarray(sums) - 1.0, bins=40)
        ax.set_xlabel("row sum - 1")
        ax.set_ylabel("rows")
        ax.set_title(f"{r['name']} (f={r['frac']})")
        save(fig, f"{r['name']}_rowsums")


def _attention_figures(lines, save):
    r = results(lines, "attention")
    st = r["stats"]
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.bar([0, 1], [st["normalize_elems_naive"], st["normalize_elems_optimized"]],
           width=0.5, color=["#777777", "#2a7fbf"])
    ax.set_xticks([0, 1], ["naive", "optimized"])
    ax.set_ylabel("normalizing mul elements")
    ax.set_title(f"downsize ratio {st['downsize_ratio']:.3f}")
    save(fig, "attention_downsize")


def _mlp_figures(lines, save):
    r = results(lines, "mlp")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(r["logit_dev"], bins=40)
    ax.set_xlabel("max |logit dev| per input")
    ax.set_ylabel("inputs")
    ax.set_title(f"argmax agreement {r['stats']['argmax_agreement']:.3f}")
    save(fig, "mlp_logit_dev")


def _scale_figures(lines, save):
    rs = results(lines)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    widths = [r["width"] for r in rs]
    got = [r["bits_per_elem_per_mul"] for r in rs]
    want = [r["expected_bits_per_elem_per_mul"] for r in rs]
    idx = np.arange(len(rs))
    ax.bar(idx - 0.18, got, width=0.36, label="measured")
    ax.bar(idx + 0.18, want, width=0.36, label="2*l*(n-1)")
    ax.set_xticks(idx, [f"w={w}" for w in widths])
    ax.set_ylabel("bits / element / mul")
    ax.legend()
    save(fig, "scale_parties_bytes")


def _comm_figures(lines, save):
    rs = results(lines)
    sizes = [r["payload_bytes"] for r in rs]
    sent = [r["bytes_sent"] for r in rs]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.loglog(sizes, sent, "o-")
    ax.set_xlabel("payload bytes")
    ax.set_ylabel("bytes sent per party")
    ax.grid(True, which="both", alpha=0.3)
    save(fig, "comm_micro")
