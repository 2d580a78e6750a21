"""Fully-connected feed-forward networks over a flat parameter vector.

Parameters are stored per layer as the row-major weight matrix followed by
the bias vector, layers concatenated in order. This is the layout the rest of
the package (and the published initial conditions) assume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Activation",
    "NetworkSpec",
    "IDENTITY",
    "softplus",
    "forward",
    "forward_batch",
    "loss_and_grad",
    "batch_loss_and_grad",
    "flatten",
    "unflatten",
]


@dataclass(frozen=True)
class Activation:
    """Component-wise activation: ``identity`` or ``softplus`` with sharpness gamma."""

    kind: str = "identity"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "softplus"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError("softplus sharpness must be positive")

    def __call__(self, x):
        if self.kind == "identity":
            return x
        # logaddexp(0, gx) switches to the x + log1p(exp(-gx)) branch for large gx
        return np.logaddexp(0.0, self.gamma * x) / self.gamma

    def derivative(self, x):
        if self.kind == "identity":
            return np.ones_like(x)
        return 0.5 * (1.0 + np.tanh(0.5 * self.gamma * x))

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": "softplus", "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d) -> "Activation":
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], float(d.get("gamma", 1.0)))


IDENTITY = Activation("identity")


def softplus(gamma: float) -> Activation:
    return Activation("softplus", gamma)


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths ``[n_u, h_1, ..., n_y]`` and one activation per layer."""

    layer_widths: tuple[int, ...]
    activations: tuple[Activation, ...]

    def __init__(self, layer_widths: Sequence[int], activations: Sequence[Activation] | None = None):
        widths = tuple(int(h) for h in layer_widths)
        if len(widths) < 2:
            raise ValueError("a network needs at least an input and an output width")
        if any(h < 1 for h in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        if activations is None:
            activations = [IDENTITY] * (len(widths) - 1)
        acts = tuple(activations)
        if len(acts) != len(widths) - 1:
            raise ValueError(f"expected {len(widths) - 1} activations, got {len(acts)}")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "_slices", self._compute_slices())

    @classmethod
    def mlp(cls, widths: Sequence[int], hidden: Activation = IDENTITY,
            output: Activation = IDENTITY) -> "NetworkSpec":
        """Hidden layers share one activation; the output layer gets its own."""
        n_layers = len(widths) - 1
        return cls(widths, [hidden] * (n_layers - 1) + [output])

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def parameter_count(self) -> int:
        h = self.layer_widths
        return sum(h[i] * (1 + h[i - 1]) for i in range(1, len(h)))

    def layer_slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """(weight slice, bias slice, weight shape) for each layer."""
        return list(self._slices)

    def _compute_slices(self):
        out = []
        offset = 0
        h = self.layer_widths
        for i in range(1, len(h)):
            n_w = h[i] * h[i - 1]
            w = slice(offset, offset + n_w)
            b = slice(offset + n_w, offset + n_w + h[i])
            out.append((w, b, (h[i], h[i - 1])))
            offset += n_w + h[i]
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activations": [a.to_dict() for a in self.activations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["layer_widths"], [Activation.from_dict(a) for a in d["activations"]])


def unflatten(spec: NetworkSpec, theta) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into ``[(W_1, b_1), ..., (W_l, b_l)]``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.parameter_count,):
        raise ValueError(f"expected {spec.parameter_count} parameters, got shape {theta.shape}")
    return [(theta[w].reshape(shape), theta[b]) for w, b, shape in spec.layer_slices()]


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in layers])


def _check_batch(spec: NetworkSpec, U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] != spec.n_inputs:
        raise ValueError(f"inputs must have shape (n, {spec.n_inputs}), got {U.shape}")
    return U


def _forward_cache(spec, theta, U):
    layers = [(theta[w].reshape(shape), theta[b]) for w, b, shape in spec._slices]
    ys = [U]
    zs = []
    y = U
    for (W, b), act in zip(layers, spec.activations):
        z = y @ W.T + b
        y = act(z)
        zs.append(z)
        ys.append(y)
    return layers, zs, ys


def forward_batch(spec: NetworkSpec, theta, U) -> np.ndarray:
    """Evaluate the network on each row of ``U``; returns shape ``(n, n_y)``."""
    U = _check_batch(spec, U)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.parameter_count,):
        raise ValueError(f"expected {spec.parameter_count} parameters, got shape {theta.shape}")
    return _forward_cache(spec, theta, U)[2][-1]


def forward(spec: NetworkSpec, theta, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.n_inputs,):
        raise ValueError(f"input must have length {spec.n_inputs}, got shape {u.shape}")
    return forward_batch(spec, theta, u[None, :])[0]


def batch_loss_and_grad(spec: NetworkSpec, theta, U, Y, alpha: float, beta: float):
    """Mean over samples of ``0.5 * (alpha*|y_i - f(u_i)|^2 + beta*|theta|^2)`` and its gradient.

    The Tikhonov term sits inside every per-sample loss, so averaging leaves it
    counted once.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.parameter_count,):
        raise ValueError(f"expected {spec.parameter_count} parameters, got shape {theta.shape}")
    U = _check_batch(spec, U)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (U.shape[0], spec.n_outputs):
        raise ValueError(f"labels must have shape ({U.shape[0]}, {spec.n_outputs}), got {Y.shape}")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    return _loss_grad(spec, theta, U, Y, alpha, beta)


def _loss_grad(spec, theta, U, Y, alpha, beta):
    """Unchecked core of :func:`batch_loss_and_grad`."""
    n = U.shape[0]
    layers, zs, ys = _forward_cache(spec, theta, U)
    resid = ys[-1] - Y
    r = resid.ravel()
    loss = 0.5 * alpha * float(r @ r) / n + 0.5 * beta * float(theta @ theta)

    grad = np.empty_like(theta)
    slices = spec._slices
    acts = spec.activations
    delta = (alpha / n) * resid
    if acts[-1].kind != "identity":
        delta = delta * acts[-1].derivative(zs[-1])
    for i in range(len(slices) - 1, -1, -1):
        w_sl, b_sl, _ = slices[i]
        grad[w_sl] = (delta.T @ ys[i]).ravel()
        grad[b_sl] = delta.sum(axis=0) if n > 1 else delta[0]
        if i > 0:
            delta = delta @ layers[i][0]
            if acts[i - 1].kind != "identity":
                delta = delta * acts[i - 1].derivative(zs[i - 1])
    if beta:
        grad += beta * theta
    return float(loss), grad


def loss_and_grad(spec: NetworkSpec, theta, u, y_hat, alpha: float, beta: float):
    """Single-sample potential ``0.5*(alpha*|y_hat - f(u)|^2 + beta*|theta|^2)`` and gradient."""
    u = np.asarray(u, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if u.shape != (spec.n_inputs,):
        raise ValueError(f"input must have length {spec.n_inputs}, got shape {u.shape}")
    if y_hat.shape != (spec.n_outputs,):
        raise ValueError(f"label must have length {spec.n_outputs}, got shape {y_hat.shape}")
    return batch_loss_and_grad(spec, theta, u[None, :], y_hat[None, :], alpha, beta)
