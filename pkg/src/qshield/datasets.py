"""Dataset loading, synthesis, and IID partitioning for the training loop.

Two sources: the bundled 150-row iris table (4 features, 3 classes) and
a synthetic two-class genomic stand-in (Gaussian mixture reduced to 4
features by a variance-ranked coordinate projection; real PCA on real
genomes is out of scope). Features are standardized with statistics
from the client training pool only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

IRIS_FILE = "iris.csv"


@dataclass
class DeviceSplit:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray


@dataclass
class Dataset:
    name: str
    n_classes: int
    train_x: np.ndarray        # client pool, standardized
    train_y: np.ndarray
    server_val_x: np.ndarray
    server_val_y: np.ndarray
    server_test_x: np.ndarray
    server_test_y: np.ndarray


def _standardize(train_x, *others):
    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std[std == 0.0] = 1.0
    return tuple((arr - mean) / std for arr in (train_x, *others))


def _assemble(name, n_classes, x, y, n_server, rng) -> Dataset:
    order = rng.permutation(x.shape[0])
    x, y = x[order], y[order]
    server_x, server_y = x[:n_server], y[:n_server]
    train_x, train_y = x[n_server:], y[n_server:]
    half = n_server // 2
    train_x, val_x, test_x = _standardize(train_x, server_x[:half], server_x[half:])
    return Dataset(
        name=name,
        n_classes=n_classes,
        train_x=train_x,
        train_y=train_y,
        server_val_x=val_x,
        server_val_y=server_y[:half],
        server_test_x=test_x,
        server_test_y=server_y[half:],
    )


def load_iris(seed: int = 0, server_count: int = 30) -> Dataset:
    """The bundled 150-row table; a shuffled slice is held out for the server."""
    path = resources.files(__package__).joinpath("data").joinpath(IRIS_FILE)
    if not path.is_file():
        raise FileNotFoundError(f"bundled dataset {IRIS_FILE} is missing")
    rows = list(csv.reader(path.read_text().splitlines()))[1:]
    x = np.array([[float(v) for v in row[:4]] for row in rows])
    y = np.array([int(row[4]) for row in rows])
    rng = np.random.default_rng(seed)
    return _assemble("iris", 3, x, y, server_count, rng)


def synth_genomic(n_train: int = 5000, n_server: int = 150, seed: int = 0) -> Dataset:
    """Two-class Gaussian mixture in 20 raw dimensions, reduced to 4.

    Reduction keeps the 4 highest-variance coordinates (deterministic
    variance-ranked projection), computed over the full draw.
    """
    rng = np.random.default_rng(seed)
    total = n_train + n_server
    dims = 20
    # informative structure in a handful of dimensions, noise elsewhere
    centers = np.zeros((2, dims))
    centers[0, :6] = [2.0, -1.5, 1.0, 0.8, -0.6, 0.4]
    centers[1, :6] = [-2.0, 1.5, -1.0, -0.8, 0.6, -0.4]
    scales = np.concatenate([np.linspace(2.0, 1.0, 6), 0.3 * np.ones(dims - 6)])
    y = rng.integers(0, 2, size=total)
    x = centers[y] + rng.normal(size=(total, dims)) * scales
    top4 = np.argsort(x.var(axis=0))[::-1][:4]
    x = x[:, np.sort(top4)]
    return _assemble("synthetic_genomic", 2, x, y, n_server, rng)


def partition_iid(dataset: Dataset, n_devices: int, seed: int = 0) -> list[DeviceSplit]:
    """Shuffle the client pool and split it into near-equal disjoint shards.

    Each shard is further split 80/20 into device-local train and
    validation sets.
    """
    if n_devices < 1:
        raise ValueError("need at least one device")
    total = dataset.train_x.shape[0]
    if n_devices > total:
        raise ValueError(f"{n_devices} devices but only {total} training samples")
    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    shards = np.array_split(order, n_devices)
    splits = []
    for shard in shards:
        cut = max(1, int(round(0.8 * shard.size)))
        tr, va = shard[:cut], shard[cut:]
        splits.append(
            DeviceSplit(
                train_x=dataset.train_x[tr],
                train_y=dataset.train_y[tr],
                val_x=dataset.train_x[va],
                val_y=dataset.train_y[va],
            )
        )
    return splits
