"""Parameter transfer over simulated three-qubit teleportation.

Two adjacent model parameters ride one teleported qubit: the first maps
to the polar angle, the second to the azimuthal phase, via a sigmoid
squash (raw parameters are unbounded, the Bloch angles are not). The
protocol itself is the textbook circuit: Bell pair between the sender's
ancilla A and the receiver's qubit B, entangling CNOT+H on the payload
qubit Q, two classical bits, then conditional X/Z on B.

Recovery has two modes because the receiver cannot undo the encoding
rotation without knowing the angles:

- verify: the angles are assumed classically known; the inverse rotation
  plus a measurement confirms the transfer was exact (the literal
  protocol's check bit), and the decoded values are returned.
- tomography: the receiver estimates the angles from repeated
  independent teleportations measured in the Z, X and Y bases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qsim import Gate, Statevector, apply_gate, measure, new_state

_Q, _A, _B = 0, 1, 2


class TeleportVerificationError(RuntimeError):
    """The receiver's check bit contradicts an exact transfer."""


@dataclass(frozen=True)
class TeleportJob:
    theta: float    # polar angle in [0, pi]
    phi: float      # azimuthal angle in [0, 2*pi)
    param_index: int

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError("theta out of range [0, pi]")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError("phi out of range [0, 2*pi)")


@dataclass
class TeleportOutcome:
    m1: int                      # payload-qubit readout
    m2: int                      # ancilla readout
    bob_state: Statevector       # receiver qubit after corrections, 1 qubit
    verify_bit: int | None = None
    verify_pre_prob: float | None = None


@dataclass(frozen=True)
class AngleEstimate:
    theta_hat: float
    phi_hat: float
    shots: int
    stderr: float


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


def encode_params_as_angles(theta_vec, j: int) -> tuple[float, float]:
    """Map parameters j and j+1 into valid Bloch angles."""
    vec = np.asarray(theta_vec, dtype=float)
    if not 0 <= j <= vec.size - 2:
        raise IndexError(f"index {j} does not leave room for a parameter pair")
    return math.pi * _sigmoid(vec[j]), 2.0 * math.pi * _sigmoid(vec[j + 1])


def decode_angles(theta: float, phi: float) -> tuple[float, float]:
    """Inverse of the sigmoid squash."""
    return _logit(theta / math.pi), _logit(phi / (2.0 * math.pi))


def _extract_receiver_qubit(sv: Statevector, m1: int, m2: int) -> Statevector:
    """Pull B's single-qubit state once Q and A have collapsed to (m1, m2)."""
    base = m1 * (1 << _Q) + m2 * (1 << _A)
    amps = np.array([sv.amps[base], sv.amps[base + (1 << _B)]], dtype=complex)
    return Statevector(1, amps)


def pre_measurement_state(theta: float, phi: float) -> Statevector:
    """The full 3-qubit state just before the two sender measurements."""
    sv = new_state(3)
    sv = apply_gate(sv, Gate("U3", target=_Q, theta=theta, phi=phi))
    sv = apply_gate(sv, Gate("H", target=_A))
    sv = apply_gate(sv, Gate("CNOT", control=_A, target=_B))
    sv = apply_gate(sv, Gate("CNOT", control=_Q, target=_A))
    sv = apply_gate(sv, Gate("H", target=_Q))
    return sv


def apply_corrections(bob: Statevector, m1: int, m2: int) -> Statevector:
    """Conditional X (on the ancilla bit) then Z (on the payload bit)."""
    if m2:
        bob = apply_gate(bob, Gate("X", target=0))
    if m1:
        bob = apply_gate(bob, Gate("Z", target=0))
    return bob


def target_state(theta: float, phi: float) -> Statevector:
    amps = np.array(
        [math.cos(theta / 2.0), np.exp(1j * phi) * math.sin(theta / 2.0)], dtype=complex
    )
    return Statevector(1, amps)


def teleport_once(theta: float, phi: float, rng: np.random.Generator) -> TeleportOutcome:
    """Run the full protocol once; the returned receiver state is corrected."""
    sv = pre_measurement_state(theta, phi)
    rec1, sv = measure(sv, _Q, rng)
    rec2, sv = measure(sv, _A, rng)
    bob = _extract_receiver_qubit(sv, rec1.bit, rec2.bit)
    bob = apply_corrections(bob, rec1.bit, rec2.bit)
    return TeleportOutcome(m1=rec1.bit, m2=rec2.bit, bob_state=bob)


def verify_inverse(outcome: TeleportOutcome, theta: float, phi: float, rng: np.random.Generator) -> int:
    """Undo the encoding rotation and measure; 0 means an exact transfer."""
    inv = Gate("U3", target=0, theta=-theta, phi=0.0, lam=-phi)
    sv = apply_gate(outcome.bob_state, inv)
    rec, _ = measure(sv, 0, rng)
    outcome.verify_bit = rec.bit
    outcome.verify_pre_prob = rec.pre_prob
    return rec.bit


def estimate_angles(theta: float, phi: float, shots: int, rng: np.random.Generator) -> AngleEstimate:
    """Tomographic angle recovery from repeated independent teleportations.

    A third of the shots each go to the Z, X and Y bases; the standard
    error scales as one over the square root of the per-basis budget.
    """
    if shots < 100:
        raise ValueError("need at least 100 shots")
    m = shots // 3

    def _freq_zero(basis_prep) -> float:
        zeros = 0
        for _ in range(m):
            bob = teleport_once(theta, phi, rng).bob_state
            rec, _ = measure(basis_prep(bob), 0, rng)
            zeros += rec.bit == 0
        return zeros / m

    f0_z = _freq_zero(lambda sv: sv)
    theta_hat = 2.0 * math.asin(math.sqrt(min(max(1.0 - f0_z, 0.0), 1.0)))

    h = Gate("H", target=0)
    sdg = Gate("U3", target=0, theta=0.0, phi=-math.pi / 2.0)  # phase -pi/2
    exp_x = 2.0 * _freq_zero(lambda sv: apply_gate(sv, h)) - 1.0
    exp_y = 2.0 * _freq_zero(lambda sv: apply_gate(apply_gate(sv, sdg), h)) - 1.0
    phi_hat = math.atan2(exp_y, exp_x) % (2.0 * math.pi)

    return AngleEstimate(theta_hat=theta_hat, phi_hat=phi_hat, shots=shots, stderr=1.0 / math.sqrt(m))


def channel_transfer(
    theta_vec,
    j: int,
    mode: str,
    rng: np.random.Generator,
    *,
    shots: int = 4096,
) -> np.ndarray:
    """Send a parameter vector; entries j and j+1 take the quantum path.

    All other entries pass through classically unchanged. In verify mode
    a failed check bit raises ``TeleportVerificationError``.
    """
    if mode not in ("verify", "tomography"):
        raise ValueError(f"unknown transfer mode {mode!r}")
    vec = np.asarray(theta_vec, dtype=float)
    theta, phi = encode_params_as_angles(vec, j)
    received = vec.copy()
    if mode == "verify":
        outcome = teleport_once(theta, phi, rng)
        verify_inverse(outcome, theta, phi, rng)
        if outcome.verify_bit != 0 or outcome.verify_pre_prob < 1.0 - 1e-9:
            raise TeleportVerificationError(
                f"check bit {outcome.verify_bit} with probability {outcome.verify_pre_prob}"
            )
        received[j], received[j + 1] = decode_angles(theta, phi)
    else:
        est = estimate_angles(theta, phi, shots, rng)
        received[j], received[j + 1] = decode_angles(est.theta_hat, est.phi_hat)
    return received
