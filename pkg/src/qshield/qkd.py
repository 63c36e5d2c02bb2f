"""BB84 key agreement on the statevector substrate.

One session transmits n single-qubit states. The sender encodes bit K[i]
as X^K|0> and conjugates with H when its basis bit R_A[i] is 1; the
receiver applies H^R_B[i] and measures. Positions where the basis bits
match are kept (sifting), a disclosed subset estimates the error rate,
and the remainder becomes key material.

Two eavesdropper models are injectable on the channel:

- intercept_resend: Eve measures each attacked qubit in a random basis
  and forwards her collapsed state (25% expected error on kept bits).
- store_and_resend: Eve keeps the qubit and forwards a fresh random
  basis state instead (50% expected error on kept bits).

No error correction or privacy amplification is applied: the simulated
channel is noiseless, so an error-free run yields identical keys on both
sides by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qsim import Gate, apply_gate, measure, new_state

EVE_KINDS = ("none", "intercept_resend", "store_and_resend")

DEFAULT_QBER_THRESHOLD = 0.11
DEFAULT_TEST_FRACTION = 0.25
DEFAULT_BLOCK_N = 512
MIN_TEST_BITS = 8

_H0 = Gate("H", target=0)
_X0 = Gate("X", target=0)


class QkdAbortError(RuntimeError):
    """Raised when a session's error rate exceeds the abort threshold."""


@dataclass(frozen=True)
class EveModel:
    kind: str = "none"
    fraction: float = 0.0  # portion of qubits attacked

    def __post_init__(self):
        if self.kind not in EVE_KINDS:
            raise ValueError(f"unknown eavesdropper kind {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("attack fraction must be in [0, 1]")


EVE_NONE = EveModel()


@dataclass
class Bb84Session:
    """Everything one protocol run produced, for inspection and tests."""

    n: int
    sender_bits: np.ndarray
    sender_bases: np.ndarray
    receiver_bases: np.ndarray
    receiver_bits: np.ndarray
    kept: np.ndarray                 # indices i with sender_bases[i] == receiver_bases[i]
    sifted_sender: np.ndarray
    sifted_receiver: np.ndarray
    test_indices: np.ndarray | None = None   # positions within the sifted strings
    qber: float | None = None
    aborted: bool = False
    key_sender: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))
    key_receiver: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))


@dataclass(frozen=True)
class KeyMaterial:
    """Key bits plus their byte packing (most-significant bit first)."""

    bits: np.ndarray
    data: bytes


@dataclass(frozen=True)
class KeyExpansion:
    """Both sides' key copies and the sessions that produced them."""

    sender: KeyMaterial
    receiver: KeyMaterial
    sessions: tuple[Bb84Session, ...]

    def mean_qber(self) -> float:
        return float(np.mean([s.qber for s in self.sessions]))


def generate_raw_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    """n random bits, each from measuring H|0> (not a bare PRNG draw)."""
    if n < 1:
        raise ValueError("bit count must be >= 1")
    bits = np.empty(n, dtype=np.uint8)
    for i in range(n):
        sv = apply_gate(new_state(1), _H0)
        rec, _ = measure(sv, 0, rng)
        bits[i] = rec.bit
    return bits


def _eve_act(sv, eve: EveModel, rng: np.random.Generator):
    if eve.kind == "none" or rng.random() >= eve.fraction:
        return sv
    if eve.kind == "intercept_resend":
        basis = int(rng.integers(0, 2))
        if basis:
            sv = apply_gate(sv, _H0)
        _, sv = measure(sv, 0, rng)
        if basis:
            sv = apply_gate(sv, _H0)  # re-encode in Eve's basis before resending
        return sv
    # store_and_resend: the original qubit never reaches the receiver
    fresh_bit = int(rng.integers(0, 2))
    fresh_basis = int(rng.integers(0, 2))
    sv = new_state(1)
    if fresh_bit:
        sv = apply_gate(sv, _X0)
    if fresh_basis:
        sv = apply_gate(sv, _H0)
    return sv


def run_bb84(n: int, eve: EveModel, rng: np.random.Generator) -> Bb84Session:
    """Transmit n qubits, measure, and sift."""
    if n < 16:
        raise ValueError("session needs at least 16 qubits")
    sender_bits = generate_raw_bits(n, rng)
    sender_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
    receiver_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
    receiver_bits = np.empty(n, dtype=np.uint8)
    for i in range(n):
        sv = new_state(1)
        if sender_bits[i]:
            sv = apply_gate(sv, _X0)
        if sender_bases[i]:
            sv = apply_gate(sv, _H0)
        sv = _eve_act(sv, eve, rng)
        if receiver_bases[i]:
            sv = apply_gate(sv, _H0)
        rec, _ = measure(sv, 0, rng)
        receiver_bits[i] = rec.bit
    kept = np.nonzero(sender_bases == receiver_bases)[0]
    return Bb84Session(
        n=n,
        sender_bits=sender_bits,
        sender_bases=sender_bases,
        receiver_bases=receiver_bases,
        receiver_bits=receiver_bits,
        kept=kept,
        sifted_sender=sender_bits[kept].copy(),
        sifted_receiver=receiver_bits[kept].copy(),
    )


def estimate_qber(session: Bb84Session, test_fraction: float, rng: np.random.Generator) -> Bb84Session:
    """Disclose a random fraction of sifted positions and score mismatches.

    Disclosed bits are consumed: the remaining positions become
    ``key_sender``/``key_receiver``.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must be in (0, 1)")
    if session.aborted:
        raise ValueError("session already aborted")
    m = session.sifted_sender.size
    n_test = int(round(m * test_fraction))
    if n_test < MIN_TEST_BITS:
        raise ValueError(f"need at least {MIN_TEST_BITS} test bits, got {n_test}")
    test_idx = np.sort(rng.choice(m, size=n_test, replace=False))
    mism = session.sifted_sender[test_idx] != session.sifted_receiver[test_idx]
    session.test_indices = test_idx
    session.qber = float(np.mean(mism))
    keep = np.ones(m, dtype=bool)
    keep[test_idx] = False
    session.key_sender = session.sifted_sender[keep]
    session.key_receiver = session.sifted_receiver[keep]
    return session


def abort_decision(session: Bb84Session, threshold: float = DEFAULT_QBER_THRESHOLD) -> bool:
    """Abort iff the estimated error rate strictly exceeds the threshold."""
    if session.qber is None:
        raise ValueError("estimate the error rate before deciding")
    session.aborted = session.qber > threshold
    return session.aborted


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack 0/1 bits into bytes, most-significant bit first."""
    if bits.size % 8 != 0:
        raise ValueError("bit count must be a multiple of 8")
    return np.packbits(bits.astype(np.uint8)).tobytes()


def expand_key(
    eve: EveModel,
    needed_bytes: int,
    rng: np.random.Generator,
    *,
    block_n: int = DEFAULT_BLOCK_N,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    threshold: float = DEFAULT_QBER_THRESHOLD,
) -> KeyExpansion:
    """Run sessions until both sides hold ``needed_bytes`` of key.

    Each block is error-tested and abort-checked; an abort surfaces as
    ``QkdAbortError`` (the channel failed, there is no key).
    """
    if needed_bytes < 1:
        raise ValueError("needed_bytes must be >= 1")
    needed_bits = 8 * needed_bytes
    sender_parts, receiver_parts, sessions = [], [], []
    have = 0
    while have < needed_bits:
        session = run_bb84(block_n, eve, rng)
        estimate_qber(session, test_fraction, rng)
        if abort_decision(session, threshold):
            raise QkdAbortError(
                f"session error rate {session.qber:.3f} exceeds threshold {threshold:.3f}"
            )
        sender_parts.append(session.key_sender)
        receiver_parts.append(session.key_receiver)
        sessions.append(session)
        have += session.key_sender.size
    sender_bits = np.concatenate(sender_parts)[:needed_bits]
    receiver_bits = np.concatenate(receiver_parts)[:needed_bits]
    return KeyExpansion(
        sender=KeyMaterial(sender_bits, pack_bits(sender_bits)),
        receiver=KeyMaterial(receiver_bits, pack_bits(receiver_bits)),
        sessions=tuple(sessions),
    )
