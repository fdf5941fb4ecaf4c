"""Trusted-dealer preprocessing: generation, file format, consumption.

The dealer runs outside the online engine (separate subcommand), draws
all correlated randomness from a counter-based generator keyed by
(seed, material kind), and writes one file per party per material kind.
The online parties only ever see their own share files.

File layout (little-endian throughout)::

    header:  magic "MPFXPRE1" | version u16 | kind u8 | width u8
             | party u16 | n_parties u16 | count u64 | params 4*u32
    payload: kind-dependent blocks, see _write_payload/_read_payload

Material kinds:

* ``triple``        a, b, c = a*b elementwise in Z_2^w
* ``mtriple``       A (m,k), B (k,r), C = A@B in Z_2^w
* ``bintriple``     bit triples over Z_2 (XOR shares, one byte per bit)
* ``dabit``         a random bit shared both in Z_2^w and as XOR bits
* ``edabit``        random m-bit value shared in Z_2^w plus XOR shares
                    of its m bits

Consumption is strictly single-use: every store key keeps a cursor that
only advances, and exhaustion raises instead of recycling. ``usage()``
reports consumed/available per key for post-run audits.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import ring, sharing
from .sharing import AShare, BShare

MAGIC = b"MPFXPRE1"
VERSION = 1
_HEADER = struct.Struct("<8sHBBHHQ4I")

KIND_TRIPLE = 1
KIND_MATRIX_TRIPLE = 2
KIND_BIN_TRIPLE = 3
KIND_DABIT = 4
KIND_EDABIT = 5

_KIND_NAMES = {
    KIND_TRIPLE: "triple",
    KIND_MATRIX_TRIPLE: "mtriple",
    KIND_BIN_TRIPLE: "bintriple",
    KIND_DABIT: "dabit",
    KIND_EDABIT: "edabit",
}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}


class PreprocessingExhausted(RuntimeError):
    """A scenario asked for more dealer material than was generated."""


@dataclass(frozen=True)
class MaterialKey:
    kind: int
    width: int
    params: tuple[int, ...] = ()

    def name(self) -> str:
        base = _KIND_NAMES[self.kind]
        if self.kind == KIND_BIN_TRIPLE:
            return base
        if self.kind == KIND_EDABIT:
            return f"{base}_w{self.width}_m{self.params[0]}"
        if self.kind == KIND_MATRIX_TRIPLE:
            m, k, r = self.params
            return f"{base}_w{self.width}_{m}x{k}x{r}"
        return f"{base}_w{self.width}"

    @staticmethod
    def from_name(name: str) -> "MaterialKey":
        parts = name.split("_")
        kind = _NAME_KINDS[parts[0]]
        if kind == KIND_BIN_TRIPLE:
            return MaterialKey(kind, 1)
        width = int(parts[1][1:])
        if kind == KIND_EDABIT:
            return MaterialKey(kind, width, (int(parts[2][1:]),))
        if kind == KIND_MATRIX_TRIPLE:
            m, k, r = (int(d) for d in parts[2].split("x"))
            return MaterialKey(kind, width, (m, k, r))
        return MaterialKey(kind, width)


def triple_key(width: int) -> MaterialKey:
    return MaterialKey(KIND_TRIPLE, width)


def mtriple_key(width: int, m: int, k: int, r: int) -> MaterialKey:
    return MaterialKey(KIND_MATRIX_TRIPLE, width, (m, k, r))


def bintriple_key() -> MaterialKey:
    return MaterialKey(KIND_BIN_TRIPLE, 1)


def dabit_key(width: int) -> MaterialKey:
    return MaterialKey(KIND_DABIT, width)


def edabit_key(width: int, m: int) -> MaterialKey:
    return MaterialKey(KIND_EDABIT, width, (m,))


# ---------------------------------------------------------------------------
# Generation


def _dealer_rng(seed: int, key: MaterialKey) -> np.random.Generator:
    material = f"{seed}:{key.name()}".encode()
    digest = hashlib.sha256(material).digest()
    counter_key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=counter_key))


def generate_material(seed: int, n_parties: int, key: MaterialKey, count: int) -> list[dict]:
    """Generate `count` items of one material kind; returns one dict of
    arrays per party."""
    rng = _dealer_rng(seed, key)
    w = key.width
    per_party: list[dict] = [{} for _ in range(n_parties)]

    def put(name: str, shares) -> None:
        for p in range(n_parties):
            per_party[p][name] = shares[p]

    if key.kind == KIND_TRIPLE:
        a = ring.random_elems(rng, (count,), w)
        b = ring.random_elems(rng, (count,), w)
        c = ring.mul(a, b, w)
        put("a", [s.values for s in sharing.share_arith(rng, a, n_parties, w)])
        put("b", [s.values for s in sharing.share_arith(rng, b, n_parties, w)])
        put("c", [s.values for s in sharing.share_arith(rng, c, n_parties, w)])
    elif key.kind == KIND_MATRIX_TRIPLE:
        m, k, r = key.params
        a = ring.random_elems(rng, (count, m, k), w)
        b = ring.random_elems(rng, (count, k, r), w)
        c = ring.matmul(a, b, w)
        put("a", [s.values for s in sharing.share_arith(rng, a, n_parties, w)])
        put("b", [s.values for s in sharing.share_arith(rng, b, n_parties, w)])
        put("c", [s.values for s in sharing.share_arith(rng, c, n_parties, w)])
    elif key.kind == KIND_BIN_TRIPLE:
        a = ring.random_bits(rng, (count,))
        b = ring.random_bits(rng, (count,))
        c = a & b
        put("a", [s.bits for s in sharing.share_bits(rng, a, n_parties)])
        put("b", [s.bits for s in sharing.share_bits(rng, b, n_parties)])
        put("c", [s.bits for s in sharing.share_bits(rng, c, n_parties)])
    elif key.kind == KIND_DABIT:
        r_bit = ring.random_bits(rng, (count,))
        put("arith", [s.values for s in
                      sharing.share_arith(rng, r_bit.astype(ring.U64), n_parties, w)])
        put("bit", [s.bits for s in sharing.share_bits(rng, r_bit, n_parties)])
    elif key.kind == KIND_EDABIT:
        m = key.params[0]
        value = ring.wrap(ring.random_elems(rng, (count,), w), m)
        bits = ring.bits_of(value, m)
        put("arith", [s.values for s in sharing.share_arith(rng, value, n_parties, w)])
        put("bits", [s.bits for s in sharing.share_bits(rng, bits, n_parties)])
    else:
        raise ValueError(f"unknown material kind {key.kind}")
    return per_party


# ---------------------------------------------------------------------------
# File IO


def _payload_blocks(key: MaterialKey, count: int) -> list[tuple[str, str, tuple]]:
    """(array name, dtype char, shape) blocks in file order."""
    if key.kind in (KIND_TRIPLE,):
        return [(n, "<u8", (count,)) for n in ("a", "b", "c")]
    if key.kind == KIND_MATRIX_TRIPLE:
        m, k, r = key.params
        return [("a", "<u8", (count, m, k)), ("b", "<u8", (count, k, r)),
                ("c", "<u8", (count, m, r))]
    if key.kind == KIND_BIN_TRIPLE:
        return [(n, "u1", (count,)) for n in ("a", "b", "c")]
    if key.kind == KIND_DABIT:
        return [("arith", "<u8", (count,)), ("bit", "u1", (count,))]
    if key.kind == KIND_EDABIT:
        m = key.params[0]
        return [("arith", "<u8", (count,)), ("bits", "u1", (count, m))]
    raise ValueError(f"unknown material kind {key.kind}")


def write_material_file(path: str, key: MaterialKey, party: int, n_parties: int,
                        count: int, arrays: dict) -> None:
    params = list(key.params) + [0] * (4 - len(key.params))
    header = _HEADER.pack(MAGIC, VERSION, key.kind, key.width, party, n_parties,
                          count, *params)
    with open(path, "wb") as fh:
        fh.write(header)
        for name, dtype, shape in _payload_blocks(key, count):
            arr = np.ascontiguousarray(arrays[name], dtype=dtype)
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
            fh.write(arr.tobytes())


def read_material_file(path: str) -> tuple[MaterialKey, int, int, int, dict]:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, version, kind, width, party, n_parties, count, p0, p1, p2, p3 = \
            _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a preprocessing file")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        nparams = {KIND_EDABIT: 1, KIND_MATRIX_TRIPLE: 3}.get(kind, 0)
        key = MaterialKey(kind, width, tuple((p0, p1, p2, p3))[:nparams])
        arrays = {}
        for name, dtype, shape in _payload_blocks(key, count):
            n_items = int(np.prod(shape)) if shape else 0
            buf = fh.read(n_items * np.dtype(dtype).itemsize)
            arrays[name] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return key, party, n_parties, count, arrays


def dealer_generate(seed: int, n_parties: int, demands: dict[MaterialKey, int],
                    out_dir: str) -> None:
    """Generate all demanded material and write per-party files."""
    for p in range(n_parties):
        os.makedirs(os.path.join(out_dir, f"party{p}"), exist_ok=True)
    for key, count in sorted(demands.items(), key=lambda kv: kv[0].name()):
        if count <= 0:
            continue
        per_party = generate_material(seed, n_parties, key, count)
        for p in range(n_parties):
            path = os.path.join(out_dir, f"party{p}", key.name() + ".bin")
            write_material_file(path, key, p, n_parties, count, per_party[p])


def write_manifest(path: str, demands: dict[MaterialKey, int]) -> None:
    named = {key.name(): int(count) for key, count in demands.items()}
    with open(path, "w") as fh:
        json.dump(named, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> dict[MaterialKey, int]:
    with open(path) as fh:
        named = json.load(fh)
    return {MaterialKey.from_name(name): int(count) for name, count in named.items()}


# ---------------------------------------------------------------------------
# Consumption


class MaterialStore:
    """One party's view of its preprocessing material.

    Items are handed out in generation order and never twice; the cursor
    for each key only moves forward.
    """

    def __init__(self, party: int):
        self.party = party
        self._arrays: dict[MaterialKey, dict] = {}
        self._counts: dict[MaterialKey, int] = {}
        self._cursors: dict[MaterialKey, int] = {}

    def add_material(self, key: MaterialKey, count: int, arrays: dict) -> None:
        self._arrays[key] = arrays
        self._counts[key] = count
        self._cursors.setdefault(key, 0)

    def _take(self, key: MaterialKey, count: int) -> tuple[int, dict]:
        if key not in self._arrays:
            self._load(key)
        cursor = self._cursors[key]
        if cursor + count > self._counts[key]:
            raise PreprocessingExhausted(
                f"party {self.party}: {key.name()} exhausted "
                f"(have {self._counts[key]}, cursor {cursor}, need {count})"
            )
        self._cursors[key] = cursor + count
        return cursor, self._arrays[key]

    def _load(self, key: MaterialKey) -> None:
        raise PreprocessingExhausted(
            f"party {self.party}: no material of kind {key.name()} available"
        )

    # -- typed accessors --------------------------------------------------

    def take_triples(self, width: int, count: int) -> tuple[AShare, AShare, AShare]:
        cur, arr = self._take(triple_key(width), count)
        sl = slice(cur, cur + count)
        return (AShare(arr["a"][sl].copy(), width), AShare(arr["b"][sl].copy(), width),
                AShare(arr["c"][sl].copy(), width))

    def take_matrix_triple(self, width: int, m: int, k: int, r: int
                           ) -> tuple[AShare, AShare, AShare]:
        cur, arr = self._take(mtriple_key(width, m, k, r), 1)
        return (AShare(arr["a"][cur].copy(), width), AShare(arr["b"][cur].copy(), width),
                AShare(arr["c"][cur].copy(), width))

    def take_bin_triples(self, count: int) -> tuple[BShare, BShare, BShare]:
        cur, arr = self._take(bintriple_key(), count)
        sl = slice(cur, cur + count)
        return (BShare(arr["a"][sl].copy()), BShare(arr["b"][sl].copy()),
                BShare(arr["c"][sl].copy()))

    def take_dabits(self, width: int, count: int) -> tuple[AShare, BShare]:
        cur, arr = self._take(dabit_key(width), count)
        sl = slice(cur, cur + count)
        return AShare(arr["arith"][sl].copy(), width), BShare(arr["bit"][sl].copy())

    def take_edabits(self, width: int, m: int, count: int) -> tuple[AShare, BShare]:
        cur, arr = self._take(edabit_key(width, m), count)
        sl = slice(cur, cur + count)
        return AShare(arr["arith"][sl].copy(), width), BShare(arr["bits"][sl].copy())

    def usage(self) -> dict[str, dict]:
        return {
            key.name(): {"consumed": self._cursors[key], "available": self._counts[key]}
            for key in sorted(self._counts, key=lambda k: k.name())
        }


class FileStore(MaterialStore):
    """Store backed by the per-party directory the dealer wrote."""

    def __init__(self, root_dir: str, party: int):
        super().__init__(party)
        self.party_dir = os.path.join(root_dir, f"party{party}")
        if not os.path.isdir(self.party_dir):
            raise FileNotFoundError(f"no preprocessing directory {self.party_dir}")

    def _load(self, key: MaterialKey) -> None:
        path = os.path.join(self.party_dir, key.name() + ".bin")
        if not os.path.exists(path):
            raise PreprocessingExhausted(
                f"party {self.party}: missing material file {path}"
            )
        file_key, party, _n, count, arrays = read_material_file(path)
        if file_key != key or party != self.party:
            raise ValueError(f"{path}: header does not match its name or party")
        self.add_material(key, count, arrays)


def memory_stores(seed: int, n_parties: int, demands: dict[MaterialKey, int]
                  ) -> list[MaterialStore]:
    """Dealer output kept in memory; used by tests and the in-process runner."""
    stores = [MaterialStore(p) for p in range(n_parties)]
    for key, count in demands.items():
        if count <= 0:
            continue
        per_party = generate_material(seed, n_parties, key, count)
        for p in range(n_parties):
            stores[p].add_material(key, count, per_party[p])
    return stores


class DemandCounter(MaterialStore):
    """Store stand-in for dry runs: returns zero material, records demand."""

    def __init__(self, party: int = 0):
        super().__init__(party)
        self.demands: dict[MaterialKey, int] = {}

    def _note(self, key: MaterialKey, count: int) -> None:
        self.demands[key] = self.demands.get(key, 0) + count

    def take_triples(self, width, count):
        self._note(triple_key(width), count)
        z = np.zeros(count, dtype=ring.U64)
        return AShare(z, width), AShare(z.copy(), width), AShare(z.copy(), width)

    def take_matrix_triple(self, width, m, k, r):
        self._note(mtriple_key(width, m, k, r), 1)
        return (AShare(np.zeros((m, k), ring.U64), width),
                AShare(np.zeros((k, r), ring.U64), width),
                AShare(np.zeros((m, r), ring.U64), width))

    def take_bin_triples(self, count):
        self._note(bintriple_key(), count)
        z = np.zeros(count, dtype=np.uint8)
        return BShare(z), BShare(z.copy()), BShare(z.copy())

    def take_dabits(self, width, count):
        self._note(dabit_key(width), count)
        return (AShare(np.zeros(count, ring.U64), width),
                BShare(np.zeros(count, np.uint8)))

    def take_edabits(self, width, m, count):
        self._note(edabit_key(width, m), count)
        return (AShare(np.zeros(count, ring.U64), width),
                BShare(np.zeros((count, m), np.uint8)))
