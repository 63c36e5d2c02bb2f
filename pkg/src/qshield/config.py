"""Experiment configuration: a flat dataclass, a key=value file format,
and typed merging of file values with CLI overrides. Unknown keys are
rejected so typos fail loudly.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .fedcore import AdversaryConfig, ChannelKind

SEED_ENV_VAR = "QSHIELD_SEED"

DATASETS = ("iris", "synthetic_genomic")
OPTIMIZERS = ("nelder_mead", "spsa")
TELEPORT_MODES = ("verify", "tomography")
KEM_MODES = ("integrity", "confidential")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = "iris"
    devices: int = 3
    rounds: int = 10
    channel: str = "plain"
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    dp: int = 6
    shots: int = 1024
    optimizer: str = "nelder_mead"
    seed: int = 0
    qkd_block_n: int = 512
    qber_threshold: float = 0.11
    qkd_test_fraction: float = 0.25
    teleport_mode: str = "verify"
    teleport_shots: int = 1024
    kem_scheme: str = "toy-lwe"
    kem_mode: str = "integrity"
    max_iter: int = 10
    measure_comm_time: bool = True
    genomic_train: int = 5000
    genomic_server: int = 150
    out_path: str | None = None

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        try:
            ChannelKind(self.channel)
        except ValueError:
            raise ConfigError(f"unknown channel {self.channel!r}") from None
        for name in ("devices", "rounds", "shots", "max_iter", "qkd_block_n", "teleport_shots"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 1 <= self.dp <= 12:
            raise ConfigError("dp must be in 1..12")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.teleport_mode not in TELEPORT_MODES:
            raise ConfigError(f"teleport_mode must be one of {TELEPORT_MODES}")
        if self.kem_mode not in KEM_MODES:
            raise ConfigError(f"kem_mode must be one of {KEM_MODES}")
        if not 0.0 < self.qkd_test_fraction < 1.0:
            raise ConfigError("qkd_test_fraction must be in (0, 1)")
        if not 0.0 <= self.qber_threshold < 1.0:
            raise ConfigError("qber_threshold must be in [0, 1)")


# keys accepted in config files and as CLI overrides; adversary fields are flattened
_FLAT_ADVERSARY = ("adversary", "adversary_fraction", "adversary_target")


def _known_keys() -> set[str]:
    names = {f.name for f in fields(ExperimentConfig)} - {"adversary"}
    return names | set(_FLAT_ADVERSARY)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def read_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; unknown keys rejected."""
    values: dict[str, str] = {}
    known = _known_keys()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def build_config(file_values: dict[str, str] | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Assemble a validated config: defaults < file < explicit overrides.

    File values are strings and get coerced to the field types; override
    values are already typed (they come from the CLI parser). The seed
    falls back to the QSHIELD_SEED environment variable when neither
    source supplies one.
    """
    merged: dict[str, object] = {}
    typed_fields = {f.name: f.type for f in fields(ExperimentConfig)}

    def _coerce(key: str, text: str):
        ftype = typed_fields[key]
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
        if ftype == "bool":
            return _parse_bool(text)
        return text

    adversary_bits = {"kind": "none", "fraction": 1.0, "target": "auto"}
    for key, text in (file_values or {}).items():
        if key == "adversary":
            adversary_bits["kind"] = text
        elif key == "adversary_fraction":
            adversary_bits["fraction"] = float(text)
        elif key == "adversary_target":
            adversary_bits["target"] = text
        else:
            try:
                merged[key] = _coerce(key, text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {text!r}") from exc

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "adversary":
            adversary_bits["kind"] = value
        elif key == "adversary_fraction":
            adversary_bits["fraction"] = float(value)
        elif key == "adversary_target":
            adversary_bits["target"] = value
        elif key in typed_fields:
            merged[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}")

    if "seed" not in merged and SEED_ENV_VAR in os.environ:
        try:
            merged["seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc

    try:
        adversary = AdversaryConfig(
            kind=str(adversary_bits["kind"]),
            fraction=float(adversary_bits["fraction"]),
            target=str(adversary_bits["target"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    cfg = ExperimentConfig(adversary=adversary, **merged)
    cfg.validate()
    return cfg
