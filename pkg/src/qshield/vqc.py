"""Four-qubit variational classifier.

Architecture: one data-encoding layer (H on every qubit, then a phase
rotation by twice the feature value) followed by a hardware-efficient
ansatz of 3 repetitions (a Y-rotation on every qubit plus a linear CNOT
chain) and a final Y-rotation layer: 16 trainable parameters.

The readout maps a sampled 4-bit outcome to a class as value mod
n_classes; class probabilities are estimated from multinomial shot
sampling of the exact statevector distribution, mirroring a sampler
backend's noise. Training is derivative-free under a hard iteration
budget: a Nelder-Mead simplex by default, SPSA as the alternative, both
returning the best parameters seen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .qsim import Gate, Statevector, apply_gate, new_state

LOSS_FLOOR = 1e-9


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int = 4
    ansatz_reps: int = 3

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.ansatz_reps + 1)


DEFAULT_SPEC = CircuitSpec()


@dataclass
class VqcModel:
    params: np.ndarray
    spec: CircuitSpec = DEFAULT_SPEC
    n_classes: int = 2

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.size != self.spec.n_params:
            raise ValueError(f"expected {self.spec.n_params} parameters, got {self.params.size}")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")
        if self.n_classes not in (2, 3):
            raise ValueError("n_classes must be 2 or 3")


@dataclass
class TrainConfig:
    max_iter: int = 10
    shots: int = 1024
    optimizer: str = "nelder_mead"   # nelder_mead | spsa
    seed: int | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.optimizer not in ("nelder_mead", "spsa"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _ry(target: int, angle: float) -> Gate:
    return Gate("U3", target=target, theta=angle, phi=0.0, lam=0.0)


def _phase(target: int, angle: float) -> Gate:
    return Gate("U3", target=target, theta=0.0, phi=angle, lam=0.0)


def run_circuit(x, params, spec: CircuitSpec = DEFAULT_SPEC) -> Statevector:
    """Encode features, apply the ansatz, return the final state."""
    x = np.asarray(x, dtype=float)
    params = np.asarray(params, dtype=float)
    if x.size != spec.n_qubits:
        raise ValueError(f"expected {spec.n_qubits} features, got {x.size}")
    if params.size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {params.size}")
    sv = new_state(spec.n_qubits)
    for q in range(spec.n_qubits):
        sv = apply_gate(sv, Gate("H", target=q))
        sv = apply_gate(sv, _phase(q, 2.0 * x[q]))
    p = 0
    for rep in range(spec.ansatz_reps):
        for q in range(spec.n_qubits):
            sv = apply_gate(sv, _ry(q, params[p]))
            p += 1
        for q in range(spec.n_qubits - 1):
            sv = apply_gate(sv, Gate("CNOT", control=q, target=q + 1))
    for q in range(spec.n_qubits):
        sv = apply_gate(sv, _ry(q, params[p]))
        p += 1
    return sv


def _bucket_matrix(n_outcomes: int, n_classes: int) -> np.ndarray:
    """Row c selects outcomes whose value mod n_classes equals c."""
    values = np.arange(n_outcomes)
    return np.stack([(values % n_classes == c) for c in range(n_classes)]).astype(float)


def class_probabilities(model: VqcModel, x, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Shot-sampled class frequencies for one input."""
    sv = run_circuit(x, model.params, model.spec)
    counts = rng.multinomial(shots, sv.probabilities())
    buckets = _bucket_matrix(counts.size, model.n_classes)
    return (buckets @ counts) / shots


def predict(model: VqcModel, x, shots: int, rng: np.random.Generator) -> int:
    """Most frequent class bucket; ties go to the lowest class id."""
    return int(np.argmax(class_probabilities(model, x, shots, rng)))


def accuracy(model: VqcModel, xs, ys, shots: int, rng: np.random.Generator) -> float:
    hits = sum(predict(model, x, shots, rng) == y for x, y in zip(xs, ys))
    return hits / len(ys)


def loss(model: VqcModel, xs, ys, shots: int, rng: np.random.Generator) -> float:
    """Mean negative log of the sampled probability of the true class."""
    xs = np.asarray(xs, dtype=float)
    if xs.shape[0] == 0:
        raise ValueError("empty split")
    total = 0.0
    for x, y in zip(xs, ys):
        p = class_probabilities(model, x, shots, rng)[int(y)]
        total += -math.log(max(p, LOSS_FLOOR))
    return total / xs.shape[0]


def _spsa_minimize(objective, x0, max_iter, rng):
    # standard decaying-gain SPSA with simultaneous two-sided perturbations
    a, c, big_a, alpha, gamma = 0.2, 0.15, max(1.0, 0.1 * max_iter), 0.602, 0.101
    x = x0.copy()
    for k in range(max_iter):
        ak = a / (k + 1 + big_a) ** alpha
        ck = c / (k + 1) ** gamma
        delta = rng.choice((-1.0, 1.0), size=x.size)
        g_hat = (objective(x + ck * delta) - objective(x - ck * delta)) / (2.0 * ck) * (1.0 / delta)
        x = x - ak * g_hat
    objective(x)  # record the final point in the best-seen tracker


def train_local(model: VqcModel, split, cfg: TrainConfig, rng: np.random.Generator) -> tuple[VqcModel, float]:
    """Optimize the model on a device split; returns (best model, best loss)."""
    best = {"loss": math.inf, "params": model.params.copy()}

    def objective(p: np.ndarray) -> float:
        val = loss(replace(model, params=p.copy()), split.train_x, split.train_y, cfg.shots, rng)
        if val < best["loss"]:
            best["loss"] = val
            best["params"] = p.copy()
        return val

    objective(model.params)
    if cfg.optimizer == "nelder_mead":
        minimize(
            objective,
            model.params,
            method="Nelder-Mead",
            options={"maxiter": cfg.max_iter, "initial_simplex": _initial_simplex(model.params)},
        )
    else:
        _spsa_minimize(objective, model.params, cfg.max_iter, rng)
    return replace(model, params=best["params"]), best["loss"]


def _initial_simplex(x0: np.ndarray, step: float = 0.4) -> np.ndarray:
    simplex = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        simplex[i + 1, i] += step
    return simplex
