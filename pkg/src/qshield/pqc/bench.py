"""Wall-clock micro-benchmarks for registered providers.

Each operation gets 3 warmup iterations, then ``trials`` timed runs;
the reported statistic is the median, which is robust to scheduler
noise at desk scale. Observed artifact sizes ride along so the output
can be checked against the published-size fixtures.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median

import numpy as np

from .providers import kem_provider, sig_provider, registered_kems, registered_sigs, UnknownSchemeError

WARMUP = 3

SIG_OPS = ("keygen", "sign", "verify")
KEM_OPS = ("keygen", "encaps", "decaps")


@dataclass(frozen=True)
class BenchRecord:
    scheme: str
    op: str
    trials: int
    median_seconds: float
    size_bytes: int


def _timed(fn, trials: int) -> tuple[float, object]:
    """Median seconds over trials (after warmup) and the last result."""
    result = None
    for _ in range(WARMUP):
        result = fn()
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return median(times), result


def _bench_sig(name: str, trials: int, rng: np.random.Generator) -> list[BenchRecord]:
    provider = sig_provider(name)
    message = rng.bytes(32)

    t_keygen, kp = _timed(lambda: provider.keygen(rng), trials)
    records = [BenchRecord(name, "keygen", trials, t_keygen, len(kp.pk))]

    # one-time keys: a fresh keypair per signing, only the sign call timed
    pool = [provider.keygen(rng) for _ in range(WARMUP + trials)]
    it = iter(pool)
    t_sign, sig = _timed(lambda: provider.sign(next(it), message), trials)
    records.append(BenchRecord(name, "sign", trials, t_sign, len(sig)))

    kp2 = provider.keygen(rng)
    sig2 = provider.sign(kp2, message)
    t_verify, ok = _timed(lambda: provider.verify(kp2.pk, message, sig2), trials)
    assert ok is True
    records.append(BenchRecord(name, "verify", trials, t_verify, 0))
    return records


def _bench_kem(name: str, trials: int, rng: np.random.Generator) -> list[BenchRecord]:
    provider = kem_provider(name)

    t_keygen, kp = _timed(lambda: provider.keygen(rng), trials)
    records = [BenchRecord(name, "keygen", trials, t_keygen, len(kp.ek))]

    t_encaps, enc = _timed(lambda: provider.encaps(kp.ek, rng), trials)
    records.append(BenchRecord(name, "encaps", trials, t_encaps, len(enc.ct)))

    t_decaps, ss = _timed(lambda: provider.decaps(kp.dk, enc.ct), trials)
    assert ss == enc.ss
    records.append(BenchRecord(name, "decaps", trials, t_decaps, len(ss)))
    return records


def bench_scheme(name: str, trials: int, rng: np.random.Generator) -> list[BenchRecord]:
    """Benchmark all operations of one runnable scheme."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if name in registered_sigs():
        return _bench_sig(name, trials, rng)
    if name in registered_kems():
        return _bench_kem(name, trials, rng)
    raise UnknownSchemeError(f"no runnable provider for {name!r}")
