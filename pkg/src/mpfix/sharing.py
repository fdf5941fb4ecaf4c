"""Additive and XOR secret sharing of tensors.

An arithmetic share tensor (AShare) holds one party's additive share of
every element of a secret tensor in Z_2^w, together with the ring width
and the fixed-point fraction it is interpreted at. A binary share tensor
(BShare) holds XOR shares of single bits, stored one byte per bit.

Linear operations on shares are local. Anything party-dependent (adding a
public constant lands on party 0 only) takes the party index explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ring


@dataclass
class AShare:
    """One party's additive share of a tensor over Z_2^width."""

    values: np.ndarray  # uint64, masked to width
    width: int
    frac: int = 0

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __add__(self, other: "AShare") -> "AShare":
        _check_like(self, other)
        return AShare(ring.add(self.values, other.values, self.width), self.width, self.frac)

    def __sub__(self, other: "AShare") -> "AShare":
        _check_like(self, other)
        return AShare(ring.sub(self.values, other.values, self.width), self.width, self.frac)

    def __neg__(self) -> "AShare":
        return AShare(ring.neg(self.values, self.width), self.width, self.frac)

    def mul_public(self, k, frac_delta: int = 0) -> "AShare":
        """Multiply by a public integer (e.g. a power of two). Local."""
        kv = ring.to_ring(k, self.width)
        return AShare(ring.mul(self.values, kv, self.width), self.width, self.frac + frac_delta)

    def __getitem__(self, idx) -> "AShare":
        return AShare(self.values[idx], self.width, self.frac)

    def reshape(self, shape) -> "AShare":
        return AShare(self.values.reshape(shape), self.width, self.frac)

    def with_frac(self, frac: int) -> "AShare":
        return AShare(self.values, self.width, frac)

    def copy(self) -> "AShare":
        return AShare(self.values.copy(), self.width, self.frac)


@dataclass
class BShare:
    """One party's XOR share of a bit tensor; one uint8 per bit."""

    bits: np.ndarray  # uint8 in {0,1}

    @property
    def shape(self):
        return self.bits.shape

    @property
    def size(self) -> int:
        return int(self.bits.size)

    def __xor__(self, other: "BShare") -> "BShare":
        return BShare(self.bits ^ other.bits)

    def __getitem__(self, idx) -> "BShare":
        return BShare(self.bits[idx])

    def and_public(self, pub_bits: np.ndarray) -> "BShare":
        """AND with public bits: each party masks its share. Local."""
        return BShare(self.bits & np.asarray(pub_bits, dtype=np.uint8))

    def copy(self) -> "BShare":
        return BShare(self.bits.copy())


def _check_like(a: AShare, b: AShare) -> None:
    if a.width != b.width:
        raise ValueError(f"width mismatch: {a.width} vs {b.width}")


def xor_public(x: BShare, pub_bits: np.ndarray, party: int) -> BShare:
    """XOR a public bit pattern in; only party 0 flips."""
    if party == 0:
        return BShare((x.bits ^ np.asarray(pub_bits, dtype=np.uint8)).astype(np.uint8))
    return BShare(x.bits.copy())


def add_public(x: AShare, const: np.ndarray, party: int) -> AShare:
    """Add a public ring constant; only party 0 adds."""
    if party == 0:
        cv = ring.to_ring(const, x.width)
        return AShare(ring.add(x.values, cv, x.width), x.width, x.frac)
    return AShare(x.values.copy(), x.width, x.frac)


def public_ashare(const, width: int, frac: int, party: int, shape=None) -> AShare:
    """Share of a public value: party 0 holds it, everyone else zero."""
    cv = ring.to_ring(const, width)
    if shape is not None:
        cv = np.broadcast_to(cv, shape).copy()
    if party == 0:
        return AShare(cv.astype(ring.U64), width, frac)
    return AShare(np.zeros(cv.shape, dtype=ring.U64), width, frac)


def share_arith(rng: np.random.Generator, secret: np.ndarray, n_parties: int,
                width: int, frac: int = 0) -> list[AShare]:
    """Split a plaintext ring tensor into n additive shares."""
    secret = ring.wrap(np.asarray(secret, dtype=ring.U64), width)
    shares = [ring.random_elems(rng, secret.shape, width) for _ in range(n_parties - 1)]
    total = np.zeros_like(secret)
    for s in shares:
        total = ring.add(total, s, width)
    shares.append(ring.sub(secret, total, width))
    return [AShare(s, width, frac) for s in shares]


def reconstruct_arith(shares: list[AShare]) -> np.ndarray:
    width = shares[0].width
    total = np.zeros(shares[0].shape, dtype=ring.U64)
    for s in shares:
        total = ring.add(total, s.values, width)
    return total


def share_bits(rng: np.random.Generator, bits: np.ndarray, n_parties: int) -> list[BShare]:
    """Split plaintext bits into n XOR shares."""
    bits = np.asarray(bits, dtype=np.uint8)
    shares = [ring.random_bits(rng, bits.shape) for _ in range(n_parties - 1)]
    total = np.zeros_like(bits)
    for s in shares:
        total ^= s
    shares.append(bits ^ total)
    return [BShare(s) for s in shares]


def reconstruct_bits(shares: list[BShare]) -> np.ndarray:
    total = np.zeros(shares[0].shape, dtype=np.uint8)
    for s in shares:
        total ^= s.bits
    return total
