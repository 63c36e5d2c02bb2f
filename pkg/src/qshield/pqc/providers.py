"""Provider interface and registry for KEM and signature schemes.

External post-quantum schemes (Dilithium, Kyber, SPHINCS+, ...) are
reachable only through this interface; what ships here are the two
reference providers plus a read-only fixture table of published sizes
for the external ones, used to validate any adapter that gets linked.
"""
from __future__ import annotations

import csv
import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

FIXTURE_FILE = "scheme_tables.csv"
FIXTURE_SHA256 = "5306aee1af29e97a9c1792302aa3289ff3b4fe85ca97bbbf8d79cf88712190e2"


class UnknownSchemeError(KeyError):
    pass


class KeyReuseError(RuntimeError):
    """A one-time signing key was asked to sign twice."""


class DecapsulationError(ValueError):
    """Ciphertext is structurally malformed (wrong size or encoding)."""


@dataclass(frozen=True)
class SchemeInfo:
    """Byte sizes of a scheme's artifacts; kind is "sig" or "kem"."""

    name: str
    kind: str
    nist_level: int
    pk_size: int
    sk_size: int
    sig_size: int | None = None
    ct_size: int | None = None
    ss_size: int | None = None


@dataclass
class KemKeypair:
    ek: bytes
    dk: bytes
    scheme: str


@dataclass(frozen=True)
class KemEncapsulation:
    ct: bytes
    ss: bytes


@dataclass
class SigKeypair:
    pk: bytes
    sk: bytes
    scheme: str
    one_time: bool = False
    used: bool = field(default=False, compare=False)


class KemProvider(ABC):
    name: str

    @abstractmethod
    def keygen(self, rng: np.random.Generator) -> KemKeypair: ...

    @abstractmethod
    def encaps(self, ek: bytes, rng: np.random.Generator) -> KemEncapsulation: ...

    @abstractmethod
    def decaps(self, dk: bytes, ct: bytes) -> bytes: ...

    @abstractmethod
    def info(self) -> SchemeInfo: ...


class SigProvider(ABC):
    name: str

    @abstractmethod
    def keygen(self, rng: np.random.Generator) -> SigKeypair: ...

    @abstractmethod
    def sign(self, keypair: SigKeypair, message: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, pk: bytes, message: bytes, signature: bytes) -> bool: ...

    @abstractmethod
    def info(self) -> SchemeInfo: ...


_KEMS: dict[str, KemProvider] = {}
_SIGS: dict[str, SigProvider] = {}


def register_kem(provider: KemProvider) -> None:
    _KEMS[provider.name] = provider


def register_sig(provider: SigProvider) -> None:
    _SIGS[provider.name] = provider


def kem_provider(name: str) -> KemProvider:
    try:
        return _KEMS[name]
    except KeyError:
        raise UnknownSchemeError(f"no registered KEM provider {name!r}") from None


def sig_provider(name: str) -> SigProvider:
    try:
        return _SIGS[name]
    except KeyError:
        raise UnknownSchemeError(f"no registered signature provider {name!r}") from None


def registered_kems() -> list[str]:
    return sorted(_KEMS)


def registered_sigs() -> list[str]:
    return sorted(_SIGS)


# convenience wrappers over the registry

def kem_keygen(scheme: str, rng: np.random.Generator) -> KemKeypair:
    return kem_provider(scheme).keygen(rng)


def kem_encaps(scheme: str, ek: bytes, rng: np.random.Generator) -> KemEncapsulation:
    return kem_provider(scheme).encaps(ek, rng)


def kem_decaps(scheme: str, dk: bytes, ct: bytes) -> bytes:
    return kem_provider(scheme).decaps(dk, ct)


def sig_keygen(scheme: str, rng: np.random.Generator) -> SigKeypair:
    return sig_provider(scheme).keygen(rng)


def sig_sign(scheme: str, keypair: SigKeypair, message: bytes) -> bytes:
    return sig_provider(scheme).sign(keypair, message)


def sig_verify(scheme: str, pk: bytes, message: bytes, signature: bytes) -> bool:
    return sig_provider(scheme).verify(pk, message, signature)


# ---------------------------------------------------------------------------
# published-size fixtures

_fixture_cache: dict[str, SchemeInfo] | None = None


def fixture_bytes() -> bytes:
    return resources.files(__package__).joinpath(FIXTURE_FILE).read_bytes()


def load_fixtures() -> dict[str, SchemeInfo]:
    """Parse the bundled size table, verifying it has not been altered."""
    global _fixture_cache
    if _fixture_cache is not None:
        return _fixture_cache
    raw = fixture_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != FIXTURE_SHA256:
        raise RuntimeError(f"scheme fixture table checksum mismatch: {digest}")
    table: dict[str, SchemeInfo] = {}
    for row in csv.DictReader(raw.decode().splitlines()):
        is_kem = bool(row["ss"])
        table[row["name"]] = SchemeInfo(
            name=row["name"],
            kind="kem" if is_kem else "sig",
            nist_level=int(row["level"]),
            pk_size=int(row["pk"]),
            sk_size=int(row["sk"]),
            sig_size=None if is_kem else int(row["sig_or_ct"]),
            ct_size=int(row["sig_or_ct"]) if is_kem else None,
            ss_size=int(row["ss"]) if is_kem else None,
        )
    _fixture_cache = table
    return table


def scheme_info(name: str) -> SchemeInfo:
    """Measured sizes for runnable providers, fixture sizes otherwise."""
    if name in _KEMS:
        return _KEMS[name].info()
    if name in _SIGS:
        return _SIGS[name].info()
    fixtures = load_fixtures()
    if name in fixtures:
        return fixtures[name]
    raise UnknownSchemeError(f"unknown scheme {name!r}")
