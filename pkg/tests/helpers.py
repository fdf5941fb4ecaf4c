"""Shared machinery for running protocol snippets across local parties."""

from __future__ import annotations

import threading

import numpy as np

from mpfix.metrics import CommMetrics
from mpfix.preprocessing import DemandCounter, memory_stores
from mpfix.session import PartySession
from mpfix.sharing import AShare, BShare
from mpfix import ring
from mpfix.transport import InProcHub, NullMesh


def run_mpc(fn, n_parties: int = 3, seed: int = 11):
    """Run fn(session) once per party over in-process queues.

    A dry pass against the null fabric sizes the preprocessing demand,
    then every party executes with exactly that much material. Returns
    the list of per-party return values.
    """
    counter = DemandCounter(party=0)
    dry = PartySession(0, n_parties, NullMesh(0, n_parties), counter,
                       metrics=CommMetrics(0, n_parties))
    fn(dry)

    stores = memory_stores(seed, n_parties, dict(counter.demands))
    hub = InProcHub(n_parties)
    out: dict[int, object] = {}
    errs: dict[int, BaseException] = {}

    def worker(p):
        try:
            session = PartySession(p, n_parties, hub.mesh(p), stores[p],
                                   metrics=CommMetrics(p, n_parties))
            out[p] = fn(session)
        except BaseException as e:  # noqa: BLE001
            errs[p] = e

    threads = [threading.Thread(target=worker, args=(p,)) for p in range(n_parties)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errs:
        raise errs[min(errs)]
    return [out[p] for p in range(n_parties)]


def deal_arith(session, values, width, frac=0, tag=0):
    """Deterministic additive sharing every party derives identically."""
    enc = ring.to_ring(np.asarray(values), width)
    rng = np.random.Generator(np.random.Philox(key=[1000 + tag, 2]))
    parts = [ring.random_elems(rng, enc.shape, width)
             for _ in range(session.n_parties - 1)]
    first = enc
    for part in parts:
        first = ring.sub(first, part, width)
    return AShare(([first] + parts)[session.party].copy(), width, frac)


def deal_fixed(session, floats, width, frac, tag=0):
    enc = ring.encode(np.asarray(floats, dtype=np.float64), width, frac)
    sh = deal_arith(session, enc, width, 0, tag=tag)
    return AShare(sh.values, width, frac), ring.decode(enc, width, frac)


def deal_bits(session, bits, tag=0):
    arr = np.asarray(bits, dtype=np.uint8)
    rng = np.random.Generator(np.random.Philox(key=[2000 + tag, 5]))
    parts = [ring.random_bits(rng, arr.shape)
             for _ in range(session.n_parties - 1)]
    first = arr.copy()
    for part in parts:
        first ^= part
    return BShare(([first] + parts)[session.party].copy())


def opened_fixed(session, share):
    return ring.decode(session.open_arith(share), share.width, share.frac)
