"""Drives scenarios: demand discovery, material setup, party execution.

Every run starts with a dry pass against the null fabric to learn the
exact preprocessing demand, so the dealer never over- or under-provisions.
run_all() then executes all parties as threads (in-process queues or a
real TCP mesh on localhost); run_party() is the entry point for one
party living in its own process.

Party failures surface as RuntimeError naming the party, the metric
scope it died in (which names the op), and the transport step id.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time

from .config import ScenarioConfig
from .metrics import CommMetrics
from .preprocessing import (
    DemandCounter,
    FileStore,
    MaterialKey,
    dealer_generate,
    memory_stores,
    read_manifest,
    write_manifest,
)
from .scenarios import SCENARIOS
from .session import PartySession
from .transport import InProcHub, NullMesh, connect_tcp_mesh

log = logging.getLogger("mpfix.runner")

MANIFEST_NAME = "manifest.json"


def _scenario_fn(name: str):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from "
                         f"{sorted(SCENARIOS)}") from None


def dry_run_demands(cfg: ScenarioConfig) -> dict[MaterialKey, int]:
    """Execute the scenario against the null fabric; returns material demand."""
    fn = _scenario_fn(cfg.scenario)
    store = DemandCounter(party=0)
    mesh = NullMesh(0, cfg.n_parties)
    metrics = CommMetrics(0, cfg.n_parties)
    session = PartySession(0, cfg.n_parties, mesh, store, metrics=metrics)
    fn(session, cfg)
    log.info("dry run: %d material kinds demanded", len(store.demands))
    return dict(store.demands)


def prepare_material(cfg: ScenarioConfig, out_dir: str) -> dict[MaterialKey, int]:
    """Dealer entry point: size the demand, generate files, write manifest."""
    demands = dry_run_demands(cfg)
    os.makedirs(out_dir, exist_ok=True)
    dealer_generate(cfg.material_seed(), cfg.n_parties, demands, out_dir)
    write_manifest(os.path.join(out_dir, MANIFEST_NAME), demands)
    return demands


def _check_manifest(cfg: ScenarioConfig, demands: dict[MaterialKey, int]) -> None:
    path = os.path.join(cfg.precomp_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(
            f"{path} not found; run 'mpfix dealer gen' for this config first")
    have = read_manifest(path)
    short = {k.name(): (have.get(k, 0), need) for k, need in demands.items()
             if have.get(k, 0) < need}
    if short:
        raise RuntimeError(
            "preprocessing directory is underprovisioned (have, need): "
            + json.dumps(short, sort_keys=True))


def _party_worker(cfg, party, make_mesh, store, out, errs):
    metrics = CommMetrics(party, cfg.n_parties)
    session = None
    mesh = None
    try:
        mesh = make_mesh()
        session = PartySession(party, cfg.n_parties, mesh, store, metrics=metrics)
        records = _scenario_fn(cfg.scenario)(session, cfg)
        out[party] = (records, metrics.as_dict(), store.usage())
    except Exception as exc:  # noqa: BLE001 - reported with diagnostics below
        scope = metrics._scope_key()
        step = getattr(session, "_step", 0)
        errs[party] = RuntimeError(
            f"party {party} failed during '{scope}' (next step id {step}): "
            f"{type(exc).__name__}: {exc}")
        errs[party].__cause__ = exc
    finally:
        if mesh is not None:
            mesh.close()


def run_all(cfg: ScenarioConfig) -> list[dict]:
    """Run every party in this process; returns the report lines."""
    demands = dry_run_demands(cfg)
    if cfg.precomp_dir:
        _check_manifest(cfg, demands)
        stores = [FileStore(cfg.precomp_dir, p) for p in range(cfg.n_parties)]
    else:
        stores = memory_stores(cfg.material_seed(), cfg.n_parties, demands)

    if cfg.transport == "inproc":
        hub = InProcHub(cfg.n_parties)
        mesh_makers = [lambda p=p: hub.mesh(p) for p in range(cfg.n_parties)]
    elif cfg.transport == "tcp":
        addrs = cfg.addresses()
        chash = cfg.config_hash()
        mesh_makers = [lambda p=p: connect_tcp_mesh(p, addrs, chash)
                       for p in range(cfg.n_parties)]
    else:
        raise ValueError(f"unknown transport {cfg.transport!r}")

    out: dict[int, tuple] = {}
    errs: dict[int, BaseException] = {}
    started = time.monotonic()
    threads = [threading.Thread(target=_party_worker, name=f"party{p}",
                                args=(cfg, p, mesh_makers[p], stores[p], out, errs))
               for p in range(cfg.n_parties)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.monotonic() - started

    if errs:
        first = min(errs)
        raise errs[first]

    canon = [json.dumps(out[p][0], sort_keys=True) for p in range(cfg.n_parties)]
    if len(set(canon)) != 1:
        diff = [p for p in range(1, cfg.n_parties) if canon[p] != canon[0]]
        raise RuntimeError(f"parties {diff} opened results that differ from party 0")

    return _assemble(cfg, out, wall)


def run_party(cfg: ScenarioConfig, party: int) -> list[dict]:
    """Run a single party (its own process); requires tcp + dealer files."""
    if cfg.transport != "tcp":
        raise ValueError("run_party needs transport='tcp'; "
                         "use run_all for in-process execution")
    if not cfg.precomp_dir:
        raise ValueError("run_party needs precomp_dir pointing at dealer output")
    if not 0 <= party < cfg.n_parties:
        raise ValueError(f"party {party} out of range for n={cfg.n_parties}")
    _check_manifest(cfg, dry_run_demands(cfg))

    store = FileStore(cfg.precomp_dir, party)
    out: dict[int, tuple] = {}
    errs: dict[int, BaseException] = {}
    started = time.monotonic()
    _party_worker(cfg, party,
                  lambda: connect_tcp_mesh(party, cfg.addresses(), cfg.config_hash()),
                  store, out, errs)
    wall = time.monotonic() - started
    if errs:
        raise errs[party]
    return _assemble(cfg, out, wall, only_party=party)


def _assemble(cfg: ScenarioConfig, out: dict[int, tuple], wall: float,
              only_party: int | None = None) -> list[dict]:
    parties = sorted(out)
    meta = {
        "record": "meta",
        "scenario": cfg.scenario,
        "n_parties": cfg.n_parties,
        "width": cfg.width,
        "frac": cfg.frac,
        "seed": cfg.seed,
        "params": cfg.params,
        "config_hash": cfg.config_hash().hex(),
    }
    if only_party is not None:
        meta["party"] = only_party
    lines = [meta,
             {"record": "transport", "kind": cfg.transport,
              "wall_seconds": round(wall, 3)}]
    lines.extend(out[parties[0]][0])
    for p in parties:
        comm = out[p][1]
        lines.append({"record": "comm", **comm})
    for p in parties:
        lines.append({"record": "usage", "party": p, "materials": out[p][2]})
    return lines
