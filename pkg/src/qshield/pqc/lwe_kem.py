"""Toy lattice KEM with zero decryption-failure probability.

Learning-with-errors construction over Z_q with q = 3329, dimension 256,
and error entries bounded by eta = 3. The decoder's noise term is r.E
with r binary, so |noise| <= 256 * 3 = 768 < q/4 = 832.25 and decoding
never fails. Parameters are chosen for that guarantee, not for
cryptographic strength; this provider exists so the encapsulation
pipeline runs end to end without external libraries. Not production
crypto.

The shared secret is SHA-256(message bits || ciphertext), binding the
ciphertext the way FO-transformed schemes do: without it, a small
perturbation of one v entry would stay inside its decode margin and
yield the same secret, letting ciphertext tampering pass unnoticed
downstream.

All matrix products run in float64: every intermediate is an integer
below 2^53 (largest is 256 * 3328^2 ~ 2.8e9), so BLAS gives exact
integer arithmetic at a fraction of the int64 cost.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .providers import (
    DecapsulationError,
    KemEncapsulation,
    KemKeypair,
    KemProvider,
    SchemeInfo,
)


def _pack_u16(arr: np.ndarray) -> bytes:
    return arr.astype(">u2").tobytes()


def _unpack_u16(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=">u2").astype(np.int64)


class ToyLweKem(KemProvider):
    name = "toy-lwe"

    def __init__(self, n: int = 256, q: int = 3329, eta: int = 3, ss_bits: int = 256):
        if n < 1 or q < 2 or eta < 0 or ss_bits % 8 != 0:
            raise ValueError("invalid KEM parameters")
        if n * eta >= q // 4 + (q % 4 > 0):
            raise ValueError(f"noise bound {n * eta} must stay below q/4 = {q / 4}")
        self.n = n
        self.q = q
        self.eta = eta
        self.ss_bits = ss_bits

    # sizes follow directly from the u16 packing of each matrix/vector
    @property
    def ek_size(self) -> int:
        return 2 * (self.n * self.n + self.n * self.ss_bits)

    @property
    def dk_size(self) -> int:
        return 2 * self.n * self.ss_bits

    @property
    def ct_size(self) -> int:
        return 2 * (self.n + self.ss_bits)

    def _mod_q(self, x: np.ndarray) -> np.ndarray:
        return np.rint(np.mod(x, self.q)).astype(np.int64)

    def keygen(self, rng: np.random.Generator) -> KemKeypair:
        n, q, m = self.n, self.q, self.ss_bits
        a = rng.integers(0, q, size=(n, n), dtype=np.int64)
        s = rng.integers(0, q, size=(n, m), dtype=np.int64)
        e = rng.integers(-self.eta, self.eta + 1, size=(n, m), dtype=np.int64)
        b = self._mod_q(a.astype(np.float64) @ s.astype(np.float64) + e)
        ek = _pack_u16(a) + _pack_u16(b)
        dk = _pack_u16(s)
        return KemKeypair(ek=ek, dk=dk, scheme=self.name)

    def encaps(self, ek: bytes, rng: np.random.Generator) -> KemEncapsulation:
        if len(ek) != self.ek_size:
            raise ValueError(f"encapsulation key must be {self.ek_size} bytes")
        n, q, m = self.n, self.q, self.ss_bits
        a = _unpack_u16(ek[: 2 * n * n]).reshape(n, n)
        b = _unpack_u16(ek[2 * n * n :]).reshape(n, m)
        r = rng.integers(0, 2, size=n, dtype=np.int64)
        bits = rng.integers(0, 2, size=m, dtype=np.uint8)
        u = self._mod_q(r.astype(np.float64) @ a.astype(np.float64))
        v = self._mod_q(r.astype(np.float64) @ b.astype(np.float64) + bits.astype(np.int64) * (q // 2))
        ct = _pack_u16(u) + _pack_u16(v)
        ss = hashlib.sha256(np.packbits(bits).tobytes() + ct).digest()
        return KemEncapsulation(ct=ct, ss=ss)

    def decaps(self, dk: bytes, ct: bytes) -> bytes:
        if len(dk) != self.dk_size:
            raise ValueError(f"decapsulation key must be {self.dk_size} bytes")
        if len(ct) != self.ct_size:
            raise DecapsulationError(f"ciphertext must be {self.ct_size} bytes")
        n, q, m = self.n, self.q, self.ss_bits
        s = _unpack_u16(dk).reshape(n, m)
        u = _unpack_u16(ct[: 2 * n])
        v = _unpack_u16(ct[2 * n :])
        d = self._mod_q(v - u.astype(np.float64) @ s.astype(np.float64))
        bits = ((d > q // 4) & (d <= 3 * q // 4)).astype(np.uint8)
        return hashlib.sha256(np.packbits(bits).tobytes() + ct).digest()

    def info(self) -> SchemeInfo:
        return SchemeInfo(
            name=self.name,
            kind="kem",
            nist_level=0,  # toy parameters, no claimed security level
            pk_size=self.ek_size,
            sk_size=self.dk_size,
            ct_size=self.ct_size,
            ss_size=hashlib.sha256().digest_size,
        )
