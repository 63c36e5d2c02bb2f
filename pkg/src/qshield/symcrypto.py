"""Byte-level protection for weight vectors.

Covers the canonical decimal serialization, the character-shift one-time
pad, an AES-GCM envelope (the "token-style" authenticated cipher behind
a 32-byte key), big-endian weight packing, SHA-256 digests, and HKDF key
derivation. AES-GCM, HKDF and SHA-256 come from `cryptography`/hashlib;
the pad and the serialization are implemented here because their exact
byte behavior is the contract.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

NONCE_SIZE = 12
TAG_SIZE = 16
KEY_SIZE = 32


class CryptoError(Exception):
    pass


class AuthenticationFailure(CryptoError):
    """Tag verification failed: wrong key or tampered envelope."""


class EnvelopeFormatError(CryptoError):
    """Envelope bytes do not match the declared wire layout."""


@dataclass(frozen=True)
class AeadEnvelope:
    nonce: bytes
    ciphertext: bytes
    tag: bytes


# ---------------------------------------------------------------------------
# canonical weight serialization

def round_weights(weights, dp: int) -> list[float]:
    """Round to dp decimal places, ties away from zero."""
    if not 1 <= dp <= 12:
        raise ValueError("decimal places must be in 1..12")
    quantum = Decimal(1).scaleb(-dp)
    out = []
    for w in np.asarray(weights, dtype=float).ravel():
        if not math.isfinite(w):
            raise ValueError("weights must be finite")
        out.append(float(Decimal(repr(float(w))).quantize(quantum, rounding=ROUND_HALF_UP)))
    return out


def serialize_weights(weights, dp: int) -> str:
    """Fixed-point decimal array text, e.g. ``[0.1235, -1.5000]`` at dp=4."""
    quantum = Decimal(1).scaleb(-dp)
    parts = []
    for w in np.asarray(weights, dtype=float).ravel():
        if not math.isfinite(w):
            raise ValueError("weights must be finite")
        parts.append(format(Decimal(repr(float(w))).quantize(quantum, rounding=ROUND_HALF_UP), "f"))
    return "[" + ", ".join(parts) + "]"


def parse_weights(text: str) -> list[float]:
    values = json.loads(text)
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise ValueError("expected a decimal array")
    return [float(v) for v in values]


# ---------------------------------------------------------------------------
# one-time pad (character shift by twice the key byte)

def _check_otp_args(text: str, key: bytes) -> None:
    if len(key) < len(text):
        raise ValueError(f"key too short: {len(key)} bytes for {len(text)} characters")
    if any(ord(ch) >= 256 for ch in text):
        raise ValueError("pad only covers code points below 256")


def otp_encrypt(message: str, key: bytes, *, xor_mode: bool = False) -> str:
    """Shift each character by twice the key byte, modulo 256.

    ``xor_mode`` switches to the classical XOR pad for comparison runs;
    the default is the shift construction. Note the shift degeneracy:
    a key byte of 128 leaves its character unchanged.
    """
    _check_otp_args(message, key)
    if xor_mode:
        return "".join(chr(ord(m) ^ k) for m, k in zip(message, key))
    return "".join(chr((ord(m) + 2 * k) % 256) for m, k in zip(message, key))


def otp_decrypt(ciphertext: str, key: bytes, *, xor_mode: bool = False) -> str:
    _check_otp_args(ciphertext, key)
    if xor_mode:
        return "".join(chr(ord(c) ^ k) for c, k in zip(ciphertext, key))
    return "".join(chr((ord(c) - 2 * k) % 256) for c, k in zip(ciphertext, key))


# ---------------------------------------------------------------------------
# authenticated encryption

def aead_encrypt(key: bytes, nonce: bytes, plaintext: bytes) -> AeadEnvelope:
    if len(key) != KEY_SIZE:
        raise ValueError(f"key must be {KEY_SIZE} bytes")
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
    blob = AESGCM(key).encrypt(nonce, plaintext, None)
    return AeadEnvelope(nonce=nonce, ciphertext=blob[:-TAG_SIZE], tag=blob[-TAG_SIZE:])


def aead_decrypt(key: bytes, env: AeadEnvelope) -> bytes:
    if len(key) != KEY_SIZE:
        raise ValueError(f"key must be {KEY_SIZE} bytes")
    if len(env.nonce) != NONCE_SIZE or len(env.tag) != TAG_SIZE:
        raise EnvelopeFormatError("bad nonce or tag length")
    try:
        return AESGCM(key).decrypt(env.nonce, env.ciphertext + env.tag, None)
    except InvalidTag as exc:
        raise AuthenticationFailure("envelope failed authentication") from exc


# ---------------------------------------------------------------------------
# envelope wire layout: kind(1) | nonce(12) | len(4, big-endian) | ciphertext | tag(16)

def encode_envelope(kind: int, env: AeadEnvelope) -> bytes:
    if not 0 <= kind <= 255:
        raise ValueError("kind must fit one byte")
    if len(env.nonce) != NONCE_SIZE or len(env.tag) != TAG_SIZE:
        raise EnvelopeFormatError("bad nonce or tag length")
    return (
        bytes([kind])
        + env.nonce
        + struct.pack(">I", len(env.ciphertext))
        + env.ciphertext
        + env.tag
    )


def decode_envelope(blob: bytes) -> tuple[int, AeadEnvelope]:
    header = 1 + NONCE_SIZE + 4
    if len(blob) < header + TAG_SIZE:
        raise EnvelopeFormatError("envelope truncated")
    kind = blob[0]
    nonce = blob[1 : 1 + NONCE_SIZE]
    (ct_len,) = struct.unpack(">I", blob[1 + NONCE_SIZE : header])
    if len(blob) != header + ct_len + TAG_SIZE:
        raise EnvelopeFormatError("envelope length does not match its header")
    ciphertext = blob[header : header + ct_len]
    tag = blob[header + ct_len :]
    return kind, AeadEnvelope(nonce=nonce, ciphertext=ciphertext, tag=tag)


# ---------------------------------------------------------------------------
# packing, hashing, derivation

def pack_weights(weights) -> bytes:
    """Concatenated 8-byte big-endian doubles, in order."""
    values = np.asarray(weights, dtype=float).ravel()
    if values.size and not np.all(np.isfinite(values)):
        raise ValueError("weights must be finite")
    return struct.pack(f">{values.size}d", *values)


def unpack_weights(data: bytes) -> np.ndarray:
    if len(data) % 8 != 0:
        raise ValueError("packed weights must be a multiple of 8 bytes")
    return np.array(struct.unpack(f">{len(data) // 8}d", data), dtype=float)


def hash_weights(weights) -> bytes:
    """SHA-256 over the packed weight bytes."""
    return hashlib.sha256(pack_weights(weights)).digest()


def derive_key(secret: bytes, info: bytes, *, salt: bytes | None = None, length: int = KEY_SIZE) -> bytes:
    """HKDF (extract-then-expand) with SHA-256; deterministic in its inputs."""
    if not secret:
        raise ValueError("secret must be nonempty")
    kdf = HKDF(algorithm=hashes.SHA256(), length=length, salt=salt, info=info)
    return kdf.derive(secret)
