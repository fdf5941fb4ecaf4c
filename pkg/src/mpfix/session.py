"""Per-party execution context for one protocol run.

A PartySession owns the transport mesh, the preprocessing store, the
communication metrics and a party-local counter-based RNG. Every opened
value funnels through ``open_many`` so rounds and payload bytes are
accounted in exactly one place: opening k tensors together costs one
round; each party broadcasts its own shares to all n-1 peers.

Width-32 (and narrower) ring elements travel as 4 bytes, width-64 as 8,
bit tensors packed 8 per byte.
"""

from __future__ import annotations

import numpy as np

from . import ring
from .metrics import CommMetrics
from .preprocessing import MaterialStore
from .sharing import AShare, BShare
from .transport import exchange_all


def _arith_dtype(width: int) -> str:
    return "<u4" if width <= 32 else "<u8"


def _ser_arith(values: np.ndarray, width: int) -> bytes:
    return np.ascontiguousarray(values).astype(_arith_dtype(width)).tobytes()


def _deser_arith(buf: bytes, shape, width: int) -> np.ndarray:
    arr = np.frombuffer(buf, dtype=_arith_dtype(width)).astype(ring.U64)
    return ring.wrap(arr.reshape(shape), width)


def _ser_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _deser_bits(buf: bytes, shape) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    arr = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), count=n, bitorder="little")
    return arr.reshape(shape)


def _part_nbytes(item) -> int:
    if isinstance(item, AShare):
        return item.size * np.dtype(_arith_dtype(item.width)).itemsize
    return (item.size + 7) // 8


class PartySession:
    def __init__(self, party: int, n_parties: int, mesh, store: MaterialStore,
                 rng: np.random.Generator | None = None,
                 metrics: CommMetrics | None = None):
        self.party = party
        self.n_parties = n_parties
        self.mesh = mesh
        self.store = store
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(key=party))
        self.metrics = metrics if metrics is not None else CommMetrics(party, n_parties)
        self._step = 0
        self._peers = [p for p in range(n_parties) if p != party]

    def scope(self, name: str):
        return self.metrics.scope(name)

    # -- opening ----------------------------------------------------------

    def open_many(self, items: list) -> list[np.ndarray]:
        """Open several shared tensors in a single communication round.

        Items may mix AShare and BShare. Returns plaintext ndarrays
        (uint64 for arithmetic, uint8 for bits) in the same order.
        """
        parts = []
        for item in items:
            if isinstance(item, AShare):
                parts.append(_ser_arith(item.values, item.width))
            elif isinstance(item, BShare):
                parts.append(_ser_bits(item.bits))
            else:
                raise TypeError(f"cannot open {type(item)}")
        payload = b"".join(parts)

        step = self._step
        self._step += 1
        payloads = {peer: payload for peer in self._peers}
        for peer in self._peers:
            self.metrics.record_send(peer, len(payload))
        self.metrics.record_round()
        replies = exchange_all(self.mesh, step, payloads)

        # Start from our own shares, then fold every peer's in.
        opened: list[np.ndarray] = []
        for item in items:
            if isinstance(item, AShare):
                opened.append(ring.wrap(item.values.copy(), item.width))
            else:
                opened.append(item.bits.copy())

        sizes = [_part_nbytes(item) for item in items]
        for peer in self._peers:
            buf = replies[peer]
            off = 0
            for idx, item in enumerate(items):
                chunk = buf[off:off + sizes[idx]]
                off += sizes[idx]
                if isinstance(item, AShare):
                    peer_vals = _deser_arith(chunk, item.shape, item.width)
                    opened[idx] = ring.add(opened[idx], peer_vals, item.width)
                else:
                    opened[idx] = opened[idx] ^ _deser_bits(chunk, item.shape)
        return opened

    def open_arith(self, t: AShare) -> np.ndarray:
        return self.open_many([t])[0]

    def open_bits(self, b: BShare) -> np.ndarray:
        return self.open_many([b])[0]
