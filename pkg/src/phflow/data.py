"""Synthetic datasets: two Gaussian classes and samples along a Duffing trajectory.

Randomness comes from numpy's ``PCG64`` bit generator seeded with the given
64-bit integer (through ``SeedSequence``), so a seed fully determines every
generated array.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ode import IntegratorConfig, integrate

__all__ = [
    "Dataset",
    "DuffingSpec",
    "make_rng",
    "gaussian_blobs",
    "split",
    "duffing_field",
    "duffing_dataset",
    "write_csv_rows",
    "fmt",
]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def fmt(x) -> str:
    """Shortest round-trip decimal representation, independent of locale."""
    return repr(float(x))


def write_csv_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, (int, np.integer)) else str(int(v)) for v in row])


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    seed: int = 0
    generator: str = "manual"
    params: dict = field(default_factory=dict)
    train_idx: Optional[np.ndarray] = None
    test_idx: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels must have the same number of samples")
        if (self.train_idx is None) != (self.test_idx is None):
            raise ValueError("train and test indices must be given together")
        if self.train_idx is not None:
            self.train_idx = np.asarray(self.train_idx, dtype=int)
            self.test_idx = np.asarray(self.test_idx, dtype=int)
            both = np.sort(np.concatenate([self.train_idx, self.test_idx]))
            if not np.array_equal(both, np.arange(len(self))):
                raise ValueError("split indices must partition the samples")

    def __len__(self):
        return len(self.inputs)

    @property
    def has_split(self) -> bool:
        return self.train_idx is not None

    def subset(self, which: str = "all") -> "Dataset":
        """``'all'``, ``'train'`` or ``'test'`` as a new (unsplit) dataset."""
        if which == "all":
            return self
        if not self.has_split:
            raise ValueError("dataset has no split")
        idx = {"train": self.train_idx, "test": self.test_idx}[which]
        return Dataset(self.inputs[idx], self.labels[idx], self.seed, self.generator,
                       dict(self.params, subset=which))

    def pairs(self):
        return list(zip(self.inputs, self.labels))

    def manifest(self) -> dict:
        m = {
            "generator": self.generator,
            "seed": int(self.seed),
            "params": self.params,
            "n_samples": len(self),
            "n_inputs": self.inputs.shape[1],
            "n_labels": self.labels.shape[1],
        }
        if self.has_split:
            m["split"] = {"train": self.train_idx.tolist(), "test": self.test_idx.tolist()}
        return m

    def save(self, csv_path, manifest_path=None) -> None:
        n_u, n_y = self.inputs.shape[1], self.labels.shape[1]
        header = [f"u{i + 1}" for i in range(n_u)] + [f"y{i + 1}" for i in range(n_y)]
        write_csv_rows(csv_path, header, np.hstack([self.inputs, self.labels]))
        if manifest_path is None:
            manifest_path = Path(csv_path).with_suffix(".json")
        Path(manifest_path).write_text(json.dumps(self.manifest(), indent=2))

    @classmethod
    def load(cls, csv_path, manifest_path=None) -> "Dataset":
        if manifest_path is None:
            manifest_path = Path(csv_path).with_suffix(".json")
        m = json.loads(Path(manifest_path).read_text())
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
        n_u = m["n_inputs"]
        split_ = m.get("split")
        return cls(
            data[:, :n_u], data[:, n_u:], m["seed"], m["generator"], m["params"],
            None if split_ is None else np.array(split_["train"], dtype=int),
            None if split_ is None else np.array(split_["test"], dtype=int),
        )


def gaussian_blobs(seed: int, n_per_class: int = 1000, mean1=(1.0, 1.0), mean2=(-1.0, -1.0),
                   sigma: float = 0.4) -> Dataset:
    """Two isotropic Gaussian classes with one-hot labels, shuffled together.

    Class 1 is labelled ``[1, 0]`` and class 2 ``[0, 1]``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    rng = make_rng(seed)
    m1 = np.asarray(mean1, dtype=float)
    m2 = np.asarray(mean2, dtype=float)
    x1 = m1 + sigma * rng.standard_normal((n_per_class, m1.size))
    x2 = m2 + sigma * rng.standard_normal((n_per_class, m2.size))
    X = np.vstack([x1, x2])
    Y = np.zeros((2 * n_per_class, 2))
    Y[:n_per_class, 0] = 1.0
    Y[n_per_class:, 1] = 1.0
    order = rng.permutation(2 * n_per_class)
    params = {"n_per_class": n_per_class, "mean1": m1.tolist(), "mean2": m2.tolist(), "sigma": sigma}
    return Dataset(X[order], Y[order], seed, "gaussian_blobs", params)


def split(dataset: Dataset, ratio_train: float = 0.75, seed: int = 0) -> Dataset:
    """Random train/test split with ``floor(ratio * s + 0.5)`` training samples.

    Index lists are kept in ascending order so the training samples are visited
    in dataset order.
    """
    if not 0 < ratio_train < 1:
        raise ValueError("ratio_train must lie strictly between 0 and 1")
    s = len(dataset)
    n_train = int(math.floor(ratio_train * s + 0.5))
    perm = make_rng(seed).permutation(s)
    return Dataset(
        dataset.inputs, dataset.labels, dataset.seed, dataset.generator,
        dict(dataset.params, split_ratio=ratio_train, split_seed=int(seed)),
        np.sort(perm[:n_train]), np.sort(perm[n_train:]),
    )


def duffing_field(u) -> np.ndarray:
    """Damped Duffing oscillator ``[u2, -u1 - u2 - 0.5 u1^3]``; works row-wise on arrays."""
    u = np.asarray(u, dtype=float)
    u1 = u[..., 0]
    u2 = u[..., 1]
    return np.stack([u2, -u1 - u2 - 0.5 * u1 ** 3], axis=-1)


@dataclass
class DuffingSpec:
    x_start: float = 0.0
    x_end: float = 8.0
    n_samples: int = 400
    u0: tuple[float, float] = (1.5, 1.0)

    def __post_init__(self):
        if not self.x_end > self.x_start:
            raise ValueError("x_end must exceed x_start")
        if self.n_samples < 2:
            raise ValueError("need at least two samples")
        self.u0 = tuple(float(v) for v in self.u0)

    @property
    def dx(self) -> float:
        return (self.x_end - self.x_start) / self.n_samples


TIGHT = IntegratorConfig(method="rk45_adaptive", rtol=1e-10, atol=1e-12)


def duffing_dataset(spec: DuffingSpec = DuffingSpec(), icfg: IntegratorConfig = TIGHT) -> Dataset:
    """Samples ``u(x_i)`` on ``n_samples + 1`` even points, labels by forward difference."""
    cfg = IntegratorConfig(icfg.method, icfg.dt, icfg.rtol, icfg.atol, icfg.max_steps, spec.dx)
    rec = integrate(duffing_field, np.array(spec.u0), spec.x_start, spec.x_end, cfg)
    traj = rec.states
    if len(traj) != spec.n_samples + 1:
        raise RuntimeError(f"expected {spec.n_samples + 1} trajectory samples, got {len(traj)}")
    xs = rec.times
    labels = (traj[1:] - traj[:-1]) / (xs[1:] - xs[:-1])[:, None]
    params = {
        "x_start": spec.x_start, "x_end": spec.x_end, "n_samples": spec.n_samples,
        "u0": list(spec.u0), "integrator": cfg.to_dict(),
    }
    return Dataset(traj[:-1].copy(), labels, 0, "duffing", params)
