"""Hash-based one-time signatures (Lamport construction over SHA-256).

Keys commit to 2 x 256 random 32-byte preimages; signing a message
reveals one preimage per bit of its SHA-256 digest. A keypair must sign
at most once: revealing preimages for two digests lets anyone forge, so
the handle enforces single use.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .providers import KeyReuseError, SchemeInfo, SigKeypair, SigProvider

DIGEST_BITS = 256
BLOCK = 32  # bytes per preimage / hash


def _digest_bits(message: bytes) -> list[int]:
    digest = hashlib.sha256(message).digest()
    return [(digest[i // 8] >> (7 - i % 8)) & 1 for i in range(DIGEST_BITS)]


def _block(data: bytes, side: int, i: int) -> bytes:
    off = (side * DIGEST_BITS + i) * BLOCK
    return data[off : off + BLOCK]


class LamportSignature(SigProvider):
    name = "lamport"

    def keygen(self, rng: np.random.Generator) -> SigKeypair:
        sk = rng.bytes(2 * DIGEST_BITS * BLOCK)
        pk = b"".join(
            hashlib.sha256(_block(sk, side, i)).digest()
            for side in (0, 1)
            for i in range(DIGEST_BITS)
        )
        return SigKeypair(pk=pk, sk=sk, scheme=self.name, one_time=True)

    def sign(self, keypair: SigKeypair, message: bytes) -> bytes:
        if keypair.used:
            raise KeyReuseError("one-time key has already signed")
        keypair.used = True
        return b"".join(_block(keypair.sk, bit, i) for i, bit in enumerate(_digest_bits(message)))

    def verify(self, pk: bytes, message: bytes, signature: bytes) -> bool:
        if len(pk) != 2 * DIGEST_BITS * BLOCK or len(signature) != DIGEST_BITS * BLOCK:
            return False
        for i, bit in enumerate(_digest_bits(message)):
            revealed = signature[i * BLOCK : (i + 1) * BLOCK]
            if hashlib.sha256(revealed).digest() != _block(pk, bit, i):
                return False
        return True

    def info(self) -> SchemeInfo:
        return SchemeInfo(
            name=self.name,
            kind="sig",
            nist_level=0,  # reference construction, not a standardized parameter set
            pk_size=2 * DIGEST_BITS * BLOCK,
            sk_size=2 * DIGEST_BITS * BLOCK,
            sig_size=DIGEST_BITS * BLOCK,
        )
