"""Communication and operation accounting.

Counter semantics, chosen so reported savings are comparable across
algorithm variants:

* ``mul_count``/``mul_elems`` count element-wise Beaver multiplications
  (invocations / elements). Matrix products are tracked separately.
* ``scale_count`` counts multiplications by a public fixed-point encoded
  constant. Multiplying by a small public integer (a power of two, a
  one-hot weight) is a local relabeling and is not a scaling.
* ``trunc_count`` counts standalone truncation protocol invocations.
  A truncation fused into a bit decomposition (pure bit relabeling) is
  free and uncounted.
* ``bytes`` counts protocol payload bytes sent by this party, excluding
  the fixed 16-byte frame header. Payload totals are what the linearity
  law (2*l*(n-1) bits per element-wise mul per party) is stated over.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field, fields


@dataclass
class OpCounters:
    mul_count: int = 0
    mul_elems: int = 0
    matmul_count: int = 0
    matmul_macs: int = 0
    and_count: int = 0
    and_elems: int = 0
    bit2a_elems: int = 0
    scale_count: int = 0
    trunc_count: int = 0
    open_count: int = 0
    rounds: int = 0
    bytes: int = 0

    def add(self, other: "OpCounters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class CommMetrics:
    """Per-party accounting: global totals, per-peer bytes, per-scope ledger."""

    def __init__(self, party: int, n_parties: int):
        self.party = party
        self.n_parties = n_parties
        self.total = OpCounters()
        self.bytes_per_peer: dict[int, int] = {p: 0 for p in range(n_parties) if p != party}
        self.ledger: dict[str, OpCounters] = {}
        self._scope_stack: list[str] = []

    # -- scoping ---------------------------------------------------------

    @contextmanager
    def scope(self, name: str):
        self._scope_stack.append(name)
        try:
            yield self
        finally:
            self._scope_stack.pop()

    def _scope_key(self) -> str:
        return "/".join(self._scope_stack) if self._scope_stack else "(root)"

    def _entry(self) -> OpCounters:
        key = self._scope_key()
        if key not in self.ledger:
            self.ledger[key] = OpCounters()
        return self.ledger[key]

    # -- recording -------------------------------------------------------

    def count(self, **deltas: int) -> None:
        entry = self._entry()
        for name, delta in deltas.items():
            setattr(entry, name, getattr(entry, name) + delta)
            setattr(self.total, name, getattr(self.total, name) + delta)

    def record_send(self, peer: int, payload_bytes: int) -> None:
        self.bytes_per_peer[peer] += payload_bytes
        self.count(bytes=payload_bytes)

    def record_round(self) -> None:
        self.count(rounds=1, open_count=1)

    # -- queries ---------------------------------------------------------

    def scoped(self, prefix: str) -> OpCounters:
        """Aggregate ledger entries whose scope path starts with prefix."""
        out = OpCounters()
        for key, entry in self.ledger.items():
            if key == prefix or key.startswith(prefix + "/"):
                out.add(entry)
        return out

    def as_dict(self) -> dict:
        return {
            "party": self.party,
            "total": self.total.as_dict(),
            "bytes_per_peer": {str(k): v for k, v in sorted(self.bytes_per_peer.items())},
            "ledger": {k: v.as_dict() for k, v in sorted(self.ledger.items())},
        }
