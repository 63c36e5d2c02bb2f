"""Round orchestration: local training, protected uplink, aggregation,
protected downlink, and metrics.

Six transport channels protect the weight vectors between devices and
the server:

- plain: bytes on the wire, no protection (the baseline).
- qkd_otp: fresh BB84 key per transfer, character-shift pad over the
  decimal serialization.
- qkd_fernet: fresh BB84 key, HKDF-derived 32-byte key, AES-GCM envelope.
- teleport: two parameters ride a teleported qubit, the rest pass
  classically.
- kem: weights travel with an AES-GCM-protected digest under an
  encapsulated shared secret; the server checks integrity against a
  locally computed hash (a "confidential" mode that encrypts the
  weights themselves is available via config).
- pqc_sign: one-time hash-based signature over the packed weights,
  fresh keypair per device per round; any invalid signature skips the
  whole round's aggregation.

Adversaries are injected in transit on the uplink: the two BB84
eavesdroppers act inside the key exchange, the tamper adversary flips a
byte of a chosen in-flight artifact.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from . import qkd, symcrypto, tpchannel, vqc
from .datasets import Dataset, DeviceSplit, load_iris, partition_iid, synth_genomic
from .pqc import (
    DecapsulationError,
    KemKeypair,
    kem_decaps,
    kem_encaps,
    kem_keygen,
    sig_keygen,
    sig_sign,
    sig_verify,
)

if TYPE_CHECKING:
    from .config import ExperimentConfig


class ChannelKind(str, Enum):
    PLAIN = "plain"
    QKD_OTP = "qkd_otp"
    QKD_FERNET = "qkd_fernet"
    TELEPORT = "teleport"
    KEM = "kem"
    PQC_SIGN = "pqc_sign"


WIRE_CODES = {kind: code for code, kind in enumerate(ChannelKind)}

ADVERSARY_KINDS = ("none", "eve_intercept", "eve_swap", "tamper")
TAMPER_TARGETS = ("auto", "weights", "kem_ct", "envelope", "signature")

METRICS_COLUMNS = (
    "round",
    "channel",
    "server_test_acc",
    "server_val_loss",
    "avg_device_loss",
    "comm_time_s",
    "qber",
    "aborted_devices",
)
METRICS_SCHEMA_VERSION = 1


class UpdateRejected(RuntimeError):
    """A device's update failed channel verification and is excluded."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str = "none"
    fraction: float = 1.0   # eve: portion of qubits; tamper: portion of transfers
    target: str = "auto"    # tamper target field

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("adversary fraction must be in [0, 1]")
        if self.target not in TAMPER_TARGETS:
            raise ValueError(f"unknown tamper target {self.target!r}")

    def eve_model(self) -> qkd.EveModel:
        if self.kind == "eve_intercept":
            return qkd.EveModel("intercept_resend", self.fraction)
        if self.kind == "eve_swap":
            return qkd.EveModel("store_and_resend", self.fraction)
        return qkd.EVE_NONE


NO_ADVERSARY = AdversaryConfig()


@dataclass
class DeviceState:
    id: int
    model: vqc.VqcModel
    shard: DeviceSplit
    kem_keys: KemKeypair | None = None  # for protected downlink on the kem channel


@dataclass
class ServerState:
    global_params: np.ndarray
    kem_keys: KemKeypair | None = None
    device_eks: dict[int, bytes] = field(default_factory=dict)


@dataclass
class RoundMetrics:
    round: int
    channel: str
    server_test_acc: float
    server_val_loss: float
    avg_device_loss: float
    comm_time_s: float
    qber: float | None
    aborted_devices: tuple[int, ...]
    aggregated: bool = True  # round applied an aggregation (not a CSV column)

    def csv_row(self) -> list[str]:
        return [
            str(self.round),
            self.channel,
            f"{self.server_test_acc:.6f}",
            f"{self.server_val_loss:.6f}",
            f"{self.avg_device_loss:.6f}",
            f"{self.comm_time_s:.6f}",
            "" if self.qber is None else f"{self.qber:.6f}",
            ";".join(str(d) for d in self.aborted_devices),
        ]


def metrics_to_csv(rows: list[RoundMetrics]) -> str:
    lines = [",".join(METRICS_COLUMNS)]
    lines.extend(",".join(r.csv_row()) for r in rows)
    return "\n".join(lines) + "\n"


def fedavg(params_list) -> np.ndarray:
    """Elementwise arithmetic mean of the accepted parameter vectors."""
    if len(params_list) == 0:
        raise ValueError("nothing to aggregate")
    stack = np.stack([np.asarray(p, dtype=float) for p in params_list])
    if stack.ndim != 2:
        raise ValueError("parameter vectors must share one length")
    return stack.mean(axis=0)


def _tampered(blob: bytes, rng: np.random.Generator) -> bytes:
    """Flip one random nonzero byte pattern at a random position."""
    out = bytearray(blob)
    pos = int(rng.integers(len(out)))
    out[pos] ^= int(rng.integers(1, 256))
    return bytes(out)


def _tamper_choice(adversary: AdversaryConfig, options: tuple[str, ...], rng) -> str | None:
    if adversary.kind != "tamper" or rng.random() >= adversary.fraction:
        return None
    if adversary.target == "auto":
        return options[int(rng.integers(len(options)))]
    return adversary.target if adversary.target in options else None


# ---------------------------------------------------------------------------
# channel transfers (shared by uplink and downlink)

def _qkd_send(params, kind, adversary, rng, cfg) -> tuple[np.ndarray, float]:
    """Encrypt under a fresh BB84 key, decrypt on the paired side."""
    message = symcrypto.serialize_weights(params, cfg.dp)
    needed = len(message) if kind == ChannelKind.QKD_OTP else symcrypto.KEY_SIZE
    try:
        expansion = qkd.expand_key(
            adversary.eve_model(), needed, rng,
            block_n=cfg.qkd_block_n,
            test_fraction=cfg.qkd_test_fraction,
            threshold=cfg.qber_threshold,
        )
    except qkd.QkdAbortError as exc:
        raise UpdateRejected(f"qkd_abort: {exc}") from exc
    qber = expansion.mean_qber()
    try:
        if kind == ChannelKind.QKD_OTP:
            wire = symcrypto.otp_encrypt(message, expansion.sender.data).encode("latin-1")
            if _tamper_choice(adversary, ("envelope",), rng):
                wire = _tampered(wire, rng)  # the pad has no integrity: may garble or pass silently
            plaintext = symcrypto.otp_decrypt(wire.decode("latin-1"), expansion.receiver.data)
        else:
            key_send = symcrypto.derive_key(expansion.sender.data, b"fernet")
            env = symcrypto.aead_encrypt(key_send, rng.bytes(symcrypto.NONCE_SIZE), message.encode())
            wire = symcrypto.encode_envelope(WIRE_CODES[kind], env)
            if _tamper_choice(adversary, ("envelope",), rng):
                wire = _tampered(wire, rng)
            _, received = symcrypto.decode_envelope(wire)
            key_recv = symcrypto.derive_key(expansion.receiver.data, b"fernet")
            plaintext = symcrypto.aead_decrypt(key_recv, received).decode()
        return np.array(symcrypto.parse_weights(plaintext)), qber
    except (symcrypto.CryptoError, ValueError) as exc:
        raise UpdateRejected(f"decrypt_failed: {exc}") from exc


def _kem_send(params, dest_ek, dest_dk, adversary, rng, cfg) -> np.ndarray:
    """Weights plus AES-GCM-protected digest under an encapsulated secret."""
    weights_wire = symcrypto.pack_weights(params)
    enc = kem_encaps(cfg.kem_scheme, dest_ek, rng)
    key = symcrypto.derive_key(enc.ss, b"kem channel")
    if cfg.kem_mode == "confidential":
        payload = weights_wire
    else:
        payload = symcrypto.hash_weights(params)
    env = symcrypto.aead_encrypt(key, rng.bytes(symcrypto.NONCE_SIZE), payload)
    env_wire = symcrypto.encode_envelope(WIRE_CODES[ChannelKind.KEM], env)
    ct = enc.ct

    hit = _tamper_choice(adversary, ("weights", "kem_ct", "envelope"), rng)
    if hit == "weights":
        weights_wire = _tampered(weights_wire, rng)
    elif hit == "kem_ct":
        ct = _tampered(ct, rng)
    elif hit == "envelope":
        env_wire = _tampered(env_wire, rng)

    # receiving side
    try:
        ss = kem_decaps(cfg.kem_scheme, dest_dk, ct)
        key_rx = symcrypto.derive_key(ss, b"kem channel")
        _, env_rx = symcrypto.decode_envelope(env_wire)
        payload_rx = symcrypto.aead_decrypt(key_rx, env_rx)
    except (DecapsulationError, symcrypto.CryptoError) as exc:
        raise UpdateRejected(f"kem_failed: {exc}") from exc
    if cfg.kem_mode == "confidential":
        return symcrypto.unpack_weights(payload_rx)
    weights = symcrypto.unpack_weights(weights_wire)
    try:
        digest = symcrypto.hash_weights(weights)
    except ValueError as exc:  # tampering can unpack to non-finite values
        raise UpdateRejected(f"corrupt_weights: {exc}") from exc
    if digest != payload_rx:
        raise UpdateRejected("digest_mismatch")
    return weights


def _signed_send(params, adversary, rng) -> np.ndarray:
    """Packed weights with a fresh one-time signature; reject on mismatch."""
    keypair = sig_keygen("lamport", rng)
    payload = symcrypto.pack_weights(params)
    signature = sig_sign("lamport", keypair, payload)

    hit = _tamper_choice(adversary, ("weights", "signature"), rng)
    if hit == "weights":
        payload = _tampered(payload, rng)
    elif hit == "signature":
        signature = _tampered(signature, rng)

    if not sig_verify("lamport", keypair.pk, payload, signature):
        raise UpdateRejected("invalid_signature")
    return symcrypto.unpack_weights(payload)


def _plain_send(params, adversary, rng) -> np.ndarray:
    wire = symcrypto.pack_weights(params)
    if _tamper_choice(adversary, ("weights",), rng):
        wire = _tampered(wire, rng)  # no protection: corruption goes unnoticed
    return symcrypto.unpack_weights(wire)


def uplink(
    device: DeviceState,
    server: ServerState,
    kind: ChannelKind,
    adversary: AdversaryConfig,
    rng: np.random.Generator,
    cfg,
) -> tuple[np.ndarray, float | None]:
    """Carry one device's parameters to the server.

    Returns (accepted weights, mean session error rate or None);
    raises ``UpdateRejected`` when the channel's checks fail.
    """
    params = device.model.params
    if kind == ChannelKind.PLAIN:
        return _plain_send(params, adversary, rng), None
    if kind in (ChannelKind.QKD_OTP, ChannelKind.QKD_FERNET):
        return _qkd_send(params, kind, adversary, rng, cfg)
    if kind == ChannelKind.TELEPORT:
        try:
            received = tpchannel.channel_transfer(
                params, 0, cfg.teleport_mode, rng, shots=cfg.teleport_shots
            )
        except tpchannel.TeleportVerificationError as exc:
            raise UpdateRejected(f"teleport_failed: {exc}") from exc
        return received, None
    if kind == ChannelKind.KEM:
        return _kem_send(params, server.kem_keys.ek, server.kem_keys.dk, adversary, rng, cfg), None
    if kind == ChannelKind.PQC_SIGN:
        return _signed_send(params, adversary, rng), None
    raise ValueError(f"unknown channel {kind!r}")


def downlink(
    server: ServerState,
    device: DeviceState,
    kind: ChannelKind,
    rng: np.random.Generator,
    cfg,
) -> None:
    """Deliver the global parameters to one device under the same channel."""
    params = server.global_params
    if kind == ChannelKind.PLAIN:
        received = _plain_send(params, NO_ADVERSARY, rng)
    elif kind in (ChannelKind.QKD_OTP, ChannelKind.QKD_FERNET):
        received, _ = _qkd_send(params, kind, NO_ADVERSARY, rng, cfg)
    elif kind == ChannelKind.TELEPORT:
        received = tpchannel.channel_transfer(params, 0, cfg.teleport_mode, rng, shots=cfg.teleport_shots)
    elif kind == ChannelKind.KEM:
        received = _kem_send(params, device.kem_keys.ek, device.kem_keys.dk, NO_ADVERSARY, rng, cfg)
    elif kind == ChannelKind.PQC_SIGN:
        received = _signed_send(params, NO_ADVERSARY, rng)
    else:
        raise ValueError(f"unknown channel {kind!r}")
    device.model = replace(device.model, params=received)


# ---------------------------------------------------------------------------
# rounds

@dataclass
class ExperimentState:
    dataset: Dataset
    devices: list[DeviceState]
    server: ServerState
    device_rngs: list[np.random.Generator]
    server_rng: np.random.Generator


def init_experiment(cfg) -> ExperimentState:
    seq = np.random.SeedSequence(cfg.seed)
    init_seed, server_seed, *device_seeds = seq.spawn(2 + cfg.devices)
    init_rng = np.random.default_rng(init_seed)

    if cfg.dataset == "iris":
        dataset = load_iris(seed=cfg.seed)
    elif cfg.dataset == "synthetic_genomic":
        dataset = synth_genomic(cfg.genomic_train, cfg.genomic_server, seed=cfg.seed)
    else:
        raise ValueError(f"unknown dataset {cfg.dataset!r}")
    shards = partition_iid(dataset, cfg.devices, seed=cfg.seed)

    spec = vqc.DEFAULT_SPEC
    devices = [
        DeviceState(
            id=i,
            model=vqc.VqcModel(
                params=init_rng.normal(0.0, 0.4, spec.n_params),
                spec=spec,
                n_classes=dataset.n_classes,
            ),
            shard=shards[i],
        )
        for i in range(cfg.devices)
    ]
    server = ServerState(global_params=np.zeros(spec.n_params))

    kind = ChannelKind(cfg.channel)
    if kind == ChannelKind.KEM:
        server.kem_keys = kem_keygen(cfg.kem_scheme, init_rng)
        for dev in devices:
            dev.kem_keys = kem_keygen(cfg.kem_scheme, init_rng)
            server.device_eks[dev.id] = dev.kem_keys.ek

    return ExperimentState(
        dataset=dataset,
        devices=devices,
        server=server,
        device_rngs=[np.random.default_rng(s) for s in device_seeds],
        server_rng=np.random.default_rng(server_seed),
    )


def run_round(state: ExperimentState, cfg, round_index: int) -> RoundMetrics:
    kind = ChannelKind(cfg.channel)
    adversary = cfg.adversary
    train_cfg = vqc.TrainConfig(max_iter=cfg.max_iter, shots=cfg.shots, optimizer=cfg.optimizer)

    device_losses = []
    for dev, rng in zip(state.devices, state.device_rngs):
        dev.model, best_loss = vqc.train_local(dev.model, dev.shard, train_cfg, rng)
        device_losses.append(best_loss)

    comm_start = time.perf_counter() if cfg.measure_comm_time else 0.0
    accepted: list[np.ndarray] = []
    rejected: list[int] = []
    qbers: list[float] = []
    for dev, rng in zip(state.devices, state.device_rngs):
        try:
            weights, qber = uplink(dev, state.server, kind, adversary, rng, cfg)
            accepted.append(weights)
            if qber is not None:
                qbers.append(qber)
        except UpdateRejected:
            rejected.append(dev.id)

    # the signature channel aggregates only when every update verified
    gate_closed = kind == ChannelKind.PQC_SIGN and rejected
    aggregated = bool(accepted) and not gate_closed
    if aggregated:
        state.server.global_params = fedavg(accepted)
        for dev in state.devices:
            downlink(state.server, dev, kind, state.server_rng, cfg)
    comm_time = (time.perf_counter() - comm_start) if cfg.measure_comm_time else 0.0

    eval_model = vqc.VqcModel(
        params=state.server.global_params.copy(),
        spec=vqc.DEFAULT_SPEC,
        n_classes=state.dataset.n_classes,
    )
    ds = state.dataset
    test_acc = vqc.accuracy(eval_model, ds.server_test_x, ds.server_test_y, cfg.shots, state.server_rng)
    val_loss = vqc.loss(eval_model, ds.server_val_x, ds.server_val_y, cfg.shots, state.server_rng)

    return RoundMetrics(
        round=round_index,
        channel=kind.value,
        server_test_acc=test_acc,
        server_val_loss=val_loss,
        avg_device_loss=float(np.mean(device_losses)),
        comm_time_s=comm_time,
        qber=float(np.mean(qbers)) if qbers else None,
        aborted_devices=tuple(rejected),
        aggregated=aggregated,
    )


@dataclass
class ExperimentResult:
    rows: list[RoundMetrics]
    summary: dict
    final_params: np.ndarray

    def to_csv(self) -> str:
        return metrics_to_csv(self.rows)


def run_experiment(cfg) -> ExperimentResult:
    """Run the configured number of rounds and summarize."""
    state = init_experiment(cfg)
    rows = [run_round(state, cfg, t) for t in range(1, cfg.rounds + 1)]
    acc = [r.server_test_acc for r in rows]
    val = [r.server_val_loss for r in rows]
    dev = [r.avg_device_loss for r in rows]
    summary = {
        "schema_version": METRICS_SCHEMA_VERSION,
        "dataset": cfg.dataset,
        "channel": cfg.channel,
        "devices": cfg.devices,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "avg_test_acc": float(np.mean(acc)),
        "final_test_acc": acc[-1],
        "avg_val_loss": float(np.mean(val)),
        "final_val_loss": val[-1],
        "avg_device_loss": float(np.mean(dev)),
        "avg_comm_time_s": float(np.mean([r.comm_time_s for r in rows])),
        "rounds_with_rejections": sum(1 for r in rows if r.aborted_devices),
        "rounds_aggregated": sum(1 for r in rows if r.aggregated),
    }
    return ExperimentResult(rows=rows, summary=summary, final_params=state.server.global_params.copy())
