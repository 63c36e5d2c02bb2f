"""Dense statevector simulator for few-qubit protocol circuits.

Conventions used everywhere in this package:

- Qubit 0 is the least-significant bit of the amplitude index, so the
  basis state |q_{n-1} ... q_1 q_0> lives at index sum(q_k << k).
- Amplitudes are complex128; global phase is never stripped.  Compare
  states with ``fidelity`` (|<a|b>|^2), not amplitude equality.
- Every sampling operation takes an explicit ``numpy.random.Generator``;
  there is no ambient randomness in this module.

The register is capped at 10 qubits: a dense 2^n vector is the simplest
correct substrate at that size and nothing here needs more than 4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

MAX_QUBITS = 10

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

GATE_KINDS = ("H", "X", "Z", "CNOT", "U3")


@dataclass(frozen=True)
class Gate:
    """One circuit operation. ``theta``/``phi``/``lam`` are used by U3 only."""

    kind: str
    target: int
    control: int | None = None
    theta: float = 0.0
    phi: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT":
            if self.control is None:
                raise ValueError("CNOT requires a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        for angle in (self.theta, self.phi, self.lam):
            if not math.isfinite(angle):
                raise ValueError("gate angles must be finite")


@dataclass
class Statevector:
    """Normalized amplitude vector over ``n_qubits`` qubits."""

    n_qubits: int
    amps: np.ndarray

    def norm_sq(self) -> float:
        return float(np.sum(self.amps.real**2 + self.amps.imag**2))

    def probabilities(self) -> np.ndarray:
        return self.amps.real**2 + self.amps.imag**2


@dataclass(frozen=True)
class MeasurementRecord:
    """A single-qubit readout: the bit and its exact Born probability."""

    qubit: int
    bit: int
    pre_prob: float


def new_state(n: int) -> Statevector:
    """All-zeros register |0...0>."""
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    return Statevector(n, amps)


def u3_matrix(theta: float, phi: float, lam: float = 0.0) -> np.ndarray:
    """General single-qubit rotation; U(theta, phi, 0)|0> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


@lru_cache(maxsize=None)
def _pair_indices(n: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude indices with target bit 0, and their bit-1 partners."""
    idx = np.arange(2**n)
    lo = idx[(idx >> target) & 1 == 0]
    return lo, lo | (1 << target)


@lru_cache(maxsize=None)
def _cnot_sources(n: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs swapped by CNOT: control bit 1, target bit 0 vs 1."""
    idx = np.arange(2**n)
    src = idx[((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)]
    return src, src | (1 << target)


def _check_qubit(sv: Statevector, q: int) -> None:
    if not 0 <= q < sv.n_qubits:
        raise ValueError(f"qubit index {q} out of range for {sv.n_qubits} qubits")


def _apply_single(sv: Statevector, m: np.ndarray, target: int) -> Statevector:
    if sv.n_qubits == 1:
        return Statevector(1, m @ sv.amps)
    lo, hi = _pair_indices(sv.n_qubits, target)
    a0, a1 = sv.amps[lo], sv.amps[hi]
    out = np.empty_like(sv.amps)
    out[lo] = m[0, 0] * a0 + m[0, 1] * a1
    out[hi] = m[1, 0] * a0 + m[1, 1] * a1
    return Statevector(sv.n_qubits, out)


def apply_gate(sv: Statevector, g: Gate) -> Statevector:
    """Apply one gate and return the new state (the input is not mutated)."""
    _check_qubit(sv, g.target)
    if g.kind == "CNOT":
        _check_qubit(sv, g.control)
        out = sv.amps.copy()
        src, dst = _cnot_sources(sv.n_qubits, g.control, g.target)
        out[src], out[dst] = sv.amps[dst], sv.amps[src]
        return Statevector(sv.n_qubits, out)
    if g.kind == "H":
        return _apply_single(sv, _H, g.target)
    if g.kind == "X":
        return _apply_single(sv, _X, g.target)
    if g.kind == "Z":
        return _apply_single(sv, _Z, g.target)
    return _apply_single(sv, u3_matrix(g.theta, g.phi, g.lam), g.target)


def apply_u3(sv: Statevector, target: int, theta: float, phi: float) -> Statevector:
    """Single-qubit rotation U(theta, phi, 0) on ``target``."""
    return apply_gate(sv, Gate("U3", target=target, theta=theta, phi=phi))


def measure(sv: Statevector, qubit: int, rng: np.random.Generator) -> tuple[MeasurementRecord, Statevector]:
    """Born-rule sample one qubit; returns the record and the collapsed state."""
    _check_qubit(sv, qubit)
    lo, hi = _pair_indices(sv.n_qubits, qubit)
    a = sv.amps
    p0 = float(np.sum(a[lo].real ** 2 + a[lo].imag ** 2))
    p1 = float(np.sum(a[hi].real ** 2 + a[hi].imag ** 2))
    bit = 0 if rng.random() < p0 else 1
    prob = p0 if bit == 0 else p1
    assert prob > 0.0, "sampled a zero-probability branch"
    out = np.zeros_like(a)
    keep = lo if bit == 0 else hi
    out[keep] = a[keep] / math.sqrt(prob)
    return MeasurementRecord(qubit, bit, prob), Statevector(sv.n_qubits, out)


def branch_outcomes(
    sv: Statevector, qubits: list[int] | tuple[int, ...]
) -> list[tuple[str, float, Statevector | None]]:
    """Exhaustively enumerate joint measurement outcomes on ``qubits``.

    Returns one entry per bitstring (character p is the bit of qubits[p]):
    (bitstring, exact probability, collapsed post-state). Zero-probability
    branches carry ``None`` for the post-state.
    """
    if len(set(qubits)) != len(qubits):
        raise ValueError("measured qubits must be distinct")
    for q in qubits:
        _check_qubit(sv, q)
    idx = np.arange(sv.amps.size)
    outcomes = []
    for bits in product((0, 1), repeat=len(qubits)):
        mask = np.ones(sv.amps.size, dtype=bool)
        for q, b in zip(qubits, bits):
            mask &= ((idx >> q) & 1) == b
        sel = sv.amps[mask]
        prob = float(np.sum(sel.real**2 + sel.imag**2))
        label = "".join(str(b) for b in bits)
        if prob <= 1e-15:
            outcomes.append((label, prob, None))
            continue
        post = np.zeros_like(sv.amps)
        post[mask] = sv.amps[mask] / math.sqrt(prob)
        outcomes.append((label, prob, Statevector(sv.n_qubits, post)))
    return outcomes


def fidelity(a: Statevector, b: Statevector) -> float:
    """|<a|b>|^2; the up-to-global-phase comparison used throughout."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("states have different qubit counts")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)
