"""Evaluation quantities for trained networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, write_csv_rows
from .net import NetworkSpec, forward_batch

__all__ = [
    "UndefinedMetricError",
    "ErrorField",
    "DecisionGrid",
    "relative_error",
    "accuracy",
    "argmax_lowest",
    "error_field",
    "decision_grid",
    "pointwise_error",
]


class UndefinedMetricError(ValueError):
    pass


def relative_error(y_hat, y_final) -> float:
    """Relative squared tracking error ``|y_hat - y|^2 / |y_hat|^2``."""
    y_hat = np.asarray(y_hat, dtype=float)
    y_final = np.asarray(y_final, dtype=float)
    denom = float(y_hat @ y_hat)
    if denom == 0.0:
        raise UndefinedMetricError("relative error is undefined for a zero label")
    d = y_hat - y_final
    return float(d @ d) / denom


def argmax_lowest(values) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest index (numpy's convention)."""
    return np.argmax(np.atleast_2d(values), axis=1)


def accuracy(spec: NetworkSpec, theta, dataset: Dataset, subset: str = "all") -> float:
    data = dataset.subset(subset)
    if len(data) == 0:
        raise UndefinedMetricError("accuracy of an empty subset")
    pred = argmax_lowest(forward_batch(spec, theta, data.inputs))
    return float(np.mean(pred == argmax_lowest(data.labels)))


def _grid(domain, resolution):
    (x1_lo, x1_hi), (x2_lo, x2_hi) = domain
    n1, n2 = resolution
    if n1 < 1 or n2 < 1:
        raise ValueError("grid resolution must be positive")
    return np.linspace(x1_lo, x1_hi, n1), np.linspace(x2_lo, x2_hi, n2)


def _nodes(g1, g2):
    # row-major over (x2, x1): values[j, i] sits at (g1[i], g2[j])
    X1, X2 = np.meshgrid(g1, g2)
    return np.column_stack([X1.ravel(), X2.ravel()])


def _long_rows(g1, g2, values):
    for j, x2 in enumerate(g2):
        for i, x1 in enumerate(g1):
            yield (x1, x2, values[j, i])


@dataclass
class ErrorField:
    grid_x1: np.ndarray
    grid_x2: np.ndarray
    values: np.ndarray  # shape (len(grid_x2), len(grid_x1))

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    def to_csv(self, path) -> None:
        write_csv_rows(path, ["x1", "x2", "value"], _long_rows(self.grid_x1, self.grid_x2, self.values))


@dataclass
class DecisionGrid:
    grid_x1: np.ndarray
    grid_x2: np.ndarray
    classes: np.ndarray  # integer class per node, shape (len(grid_x2), len(grid_x1))

    def to_csv(self, path) -> None:
        rows = ((x1, x2, int(c)) for x1, x2, c in _long_rows(self.grid_x1, self.grid_x2, self.classes))
        write_csv_rows(path, ["x1", "x2", "value"], rows)


def pointwise_error(spec: NetworkSpec, theta, points, field: Callable) -> np.ndarray:
    """``|field(u) - f(u, theta)|_2`` at each row of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    diff = field(points) - forward_batch(spec, theta, points)
    return np.sqrt(np.sum(diff * diff, axis=1))


def error_field(spec: NetworkSpec, theta, domain: Sequence[Sequence[float]], resolution: Sequence[int],
                field: Callable) -> ErrorField:
    """Reconstruction error of a vector field on a rectangular grid.

    ``domain`` is ``((x1_min, x1_max), (x2_min, x2_max))`` and ``field`` maps
    an ``(n, 2)`` array of points to an ``(n, 2)`` array of vectors.
    """
    g1, g2 = _grid(domain, resolution)
    vals = pointwise_error(spec, theta, _nodes(g1, g2), field)
    return ErrorField(g1, g2, vals.reshape(len(g2), len(g1)))


def decision_grid(spec: NetworkSpec, theta, domain, resolution) -> DecisionGrid:
    g1, g2 = _grid(domain, resolution)
    cls = argmax_lowest(forward_batch(spec, theta, _nodes(g1, g2)))
    return DecisionGrid(g1, g2, cls.reshape(len(g2), len(g1)))
