"""KEM and signature providers, size fixtures, and benchmarks."""
from .providers import (
    DecapsulationError,
    KemEncapsulation,
    KemKeypair,
    KemProvider,
    KeyReuseError,
    SchemeInfo,
    SigKeypair,
    SigProvider,
    UnknownSchemeError,
    kem_decaps,
    kem_encaps,
    kem_keygen,
    kem_provider,
    load_fixtures,
    register_kem,
    register_sig,
    registered_kems,
    registered_sigs,
    scheme_info,
    sig_keygen,
    sig_provider,
    sig_sign,
    sig_verify,
)
from .lamport import LamportSignature
from .lwe_kem import ToyLweKem
from .bench import BenchRecord, bench_scheme

register_kem(ToyLweKem())
register_sig(LamportSignature())

__all__ = [
    "BenchRecord",
    "DecapsulationError",
    "KemEncapsulation",
    "KemKeypair",
    "KemProvider",
    "KeyReuseError",
    "LamportSignature",
    "SchemeInfo",
    "SigKeypair",
    "SigProvider",
    "ToyLweKem",
    "UnknownSchemeError",
    "bench_scheme",
    "kem_decaps",
    "kem_encaps",
    "kem_keygen",
    "kem_provider",
    "load_fixtures",
    "register_kem",
    "register_sig",
    "registered_kems",
    "registered_sigs",
    "scheme_info",
    "sig_keygen",
    "sig_provider",
    "sig_sign",
    "sig_verify",
]
