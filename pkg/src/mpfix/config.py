"""Run configuration shared by every party of a scenario.

The semantic fields (scenario, party count, ring geometry, seed, knobs)
feed a canonical hash that peers compare during the transport
handshake, so two processes can't silently run different experiments
against each other. Plumbing fields (transport kind, host, ports,
material directory) stay out of the hash: they may legitimately differ
between otherwise identical runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict
from typing import Optional


SCENARIO_NAMES = (
    "nonlinear-sweep",
    "softmax-bench",
    "attention-bench",
    "mlp-simple",
    "scale-parties",
    "comm-micro",
)

_DEFAULTS = {
    "nonlinear-sweep": dict(frac=23, params={"points": 160}),
    "softmax-bench": dict(frac=23, params={"rows": 1000, "cols": 196, "rows_alt": 200}),
    "attention-bench": dict(frac=14, params={"d1": 196, "d2": 196, "d3": 64, "heads": 4}),
    "mlp-simple": dict(frac=23, params={"batch": 200, "in_dim": 784,
                                        "hidden": 128, "out_dim": 10}),
    "scale-parties": dict(params={"count": 4096, "reps": 4}),
    "comm-micro": dict(params={"sizes": [1024, 65536, 1048576, 10485760]}),
}


@dataclass
class ScenarioConfig:
    scenario: str
    n_parties: int = 2
    width: int = 64
    frac: int = 23
    seed: int = 7
    params: dict = field(default_factory=dict)
    # plumbing, excluded from the semantic hash
    transport: str = "inproc"
    host: str = "127.0.0.1"
    base_port: int = 29500
    precomp_dir: Optional[str] = None

    def semantic_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_parties": self.n_parties,
            "width": self.width,
            "frac": self.frac,
            "seed": self.seed,
            "params": self.params,
        }

    def config_hash(self) -> bytes:
        canon = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).digest()

    def material_seed(self) -> int:
        tag = hashlib.sha256(f"{self.seed}:dealer".encode()).digest()
        return int.from_bytes(tag[:6], "little")

    def addresses(self) -> list[tuple[str, int]]:
        return [(self.host, self.base_port + i) for i in range(self.n_parties)]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_config(scenario: str, **overrides) -> ScenarioConfig:
    if scenario not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIO_NAMES}")
    base = _DEFAULTS.get(scenario, {})
    kwargs = {k: v for k, v in base.items() if k != "params"}
    params = dict(base.get("params", {}))
    params.update(overrides.pop("params", {}))
    kwargs.update(overrides)
    return ScenarioConfig(scenario=scenario, params=params, **kwargs)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    if "scenario" not in raw:
        raise ValueError(f"{path}: missing 'scenario'")
    return default_config(raw.pop("scenario"), **raw)
