"""Port-Hamiltonian dynamics on the parameter space of a network.

The state is ``xi = (theta, omega)`` with momenta ``omega = M theta_dot``. The
energy is the training loss plus ``0.5 * omega^T M^-1 omega`` and the flow is

    theta_dot = M^-1 omega
    omega_dot = -dJ/dtheta - (B + k I) M^-1 omega

i.e. ``xi_dot = (J - R) dH + g v`` with canonical ``J``, ``R = diag(0, B)`` and
damping injection ``v = -k theta_dot`` through the velocity port. None of the
2p x 2p structure matrices is ever formed; ``B`` and ``M`` are scalars or
diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .net import NetworkSpec, _loss_grad, batch_loss_and_grad

__all__ = [
    "PHConfig",
    "PHState",
    "EnergyReport",
    "NetworkPotential",
    "PHSystem",
    "hamiltonian",
    "grad_hamiltonian",
    "vector_field",
    "output_port",
    "energy_rate",
]

Potential = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def _positive(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim > 1:
        raise ValueError(f"{name} must be a scalar or a diagonal (1-D array)")
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
        raise ValueError(f"{name} must be symmetric positive definite (all entries > 0)")
    return float(arr) if arr.ndim == 0 else arr.copy()


@dataclass
class PHConfig:
    """Loss weights and the damping / inertia / injection of the parameter flow.

    ``damping`` and ``inertia`` are either scalars (times the identity) or
    1-D arrays holding a diagonal.
    """

    alpha: float = 1.0
    beta: float = 0.0
    damping: float | np.ndarray = 1.0
    inertia: float | np.ndarray = 1.0
    injection_gain: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.injection_gain < 0:
            raise ValueError("injection gain must be non-negative")
        self.damping = _positive(self.damping, "damping")
        self.inertia = _positive(self.inertia, "inertia")

    def check_dimension(self, p: int):
        for name in ("damping", "inertia"):
            v = getattr(self, name)
            if np.ndim(v) == 1 and len(v) != p:
                raise ValueError(f"{name} diagonal has length {len(v)}, expected {p}")

    def to_dict(self) -> dict:
        def enc(v):
            return v.tolist() if isinstance(v, np.ndarray) else v
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "damping": enc(self.damping),
            "inertia": enc(self.inertia),
            "injection_gain": self.injection_gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PHConfig":
        def dec(v):
            return np.asarray(v, dtype=float) if isinstance(v, list) else float(v)
        return cls(
            alpha=float(d.get("alpha", 1.0)),
            beta=float(d.get("beta", 0.0)),
            damping=dec(d.get("damping", 1.0)),
            inertia=dec(d.get("inertia", 1.0)),
            injection_gain=float(d.get("injection_gain", 0.0)),
        )


@dataclass
class PHState:
    theta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.theta.ndim != 1 or self.theta.shape != self.omega.shape:
            raise ValueError("theta and omega must be vectors of equal length")

    @property
    def p(self) -> int:
        return len(self.theta)

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate([self.theta, self.omega])

    @classmethod
    def from_xi(cls, xi) -> "PHState":
        xi = np.asarray(xi, dtype=float)
        if xi.ndim != 1 or len(xi) % 2:
            raise ValueError("state vector must have even length 2p")
        p = len(xi) // 2
        return cls(xi[:p].copy(), xi[p:].copy())

    @classmethod
    def at_rest(cls, theta) -> "PHState":
        theta = np.asarray(theta, dtype=float)
        return cls(theta.copy(), np.zeros_like(theta))


@dataclass(frozen=True)
class EnergyReport:
    hamiltonian: float
    potential: float
    kinetic: float
    dissipation_rate: float


@dataclass
class NetworkPotential:
    """Batch-averaged network loss as a function of the flat parameters."""

    spec: NetworkSpec
    inputs: np.ndarray
    labels: np.ndarray
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        if len(self.inputs) == 0:
            raise ValueError("batch must be non-empty")
        # validates shapes once; evaluations below skip the checks
        batch_loss_and_grad(self.spec, np.zeros(self.spec.parameter_count), self.inputs, self.labels,
                            self.alpha, self.beta)

    def __call__(self, theta):
        return _loss_grad(self.spec, theta, self.inputs, self.labels, self.alpha, self.beta)


@dataclass
class PHSystem:
    """A potential paired with a :class:`PHConfig`, evaluated on flat ``xi`` vectors."""

    potential: Potential
    config: PHConfig
    p: int
    _inv_m: float | np.ndarray = field(init=False, repr=False)
    _friction: float | np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.config.check_dimension(self.p)
        self._inv_m = 1.0 / self.config.inertia
        # B + kI, applied to the velocity
        self._friction = self.config.damping + self.config.injection_gain

    def _split(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (2 * self.p,):
            raise ValueError(f"state must have length {2 * self.p}, got shape {xi.shape}")
        return xi[: self.p], xi[self.p:]

    def velocity(self, xi) -> np.ndarray:
        return self._inv_m * self._split(xi)[1]

    def _rate(self, v) -> float:
        cfg = self.config
        return -float(np.dot(v, cfg.damping * v)) - cfg.injection_gain * float(np.dot(v, v))

    def energy(self, xi) -> EnergyReport:
        theta, omega = self._split(xi)
        pot, _ = self.potential(theta)
        v = self._inv_m * omega
        kin = 0.5 * float(np.dot(omega, v))
        return EnergyReport(pot + kin, pot, kin, self._rate(v))

    def gradient(self, xi) -> np.ndarray:
        theta, omega = self._split(xi)
        _, g = self.potential(theta)
        return np.concatenate([g, self._inv_m * omega])

    def field(self, xi) -> np.ndarray:
        p = self.p
        if xi.shape != (2 * p,):
            raise ValueError(f"state must have length {2 * p}, got shape {xi.shape}")
        _, g = self.potential(xi[:p])
        v = self._inv_m * xi[p:]
        out = np.empty(2 * p)
        out[:p] = v
        out[p:] = -g - self._friction * v
        return out

    __call__ = field

    def energy_and_rate(self, xi) -> tuple[float, float]:
        e = self.energy(xi)
        return e.hamiltonian, e.dissipation_rate


def _system(spec: NetworkSpec, cfg: PHConfig, batch) -> PHSystem:
    U, Y = _batch_arrays(batch)
    pot = NetworkPotential(spec, U, Y, cfg.alpha, cfg.beta)
    return PHSystem(pot, cfg, spec.parameter_count)


def _batch_arrays(batch):
    """Accept a sequence of ``(u, y)`` pairs, a ``(U, Y)`` array pair or a Dataset."""
    if hasattr(batch, "inputs") and hasattr(batch, "labels"):
        U, Y = batch.inputs, batch.labels
    elif isinstance(batch, tuple) and len(batch) == 2 and np.ndim(batch[0]) == 2:
        U, Y = batch
    else:
        pairs = list(batch)
        if not pairs:
            raise ValueError("batch must be non-empty")
        U = np.array([np.asarray(u, dtype=float) for u, _ in pairs])
        Y = np.array([np.asarray(y, dtype=float) for _, y in pairs])
    U = np.asarray(U, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(U) == 0:
        raise ValueError("batch must be non-empty")
    return U, Y


def hamiltonian(spec: NetworkSpec, cfg: PHConfig, state: PHState, batch) -> EnergyReport:
    return _system(spec, cfg, batch).energy(state.xi)


def grad_hamiltonian(spec: NetworkSpec, cfg: PHConfig, state: PHState, batch) -> np.ndarray:
    return _system(spec, cfg, batch).gradient(state.xi)


def vector_field(spec: NetworkSpec, cfg: PHConfig, state: PHState, batch) -> np.ndarray:
    return _system(spec, cfg, batch).field(state.xi)


def output_port(cfg: PHConfig, state: PHState) -> np.ndarray:
    """Velocities ``z = M^-1 omega`` conjugate to the injection input."""
    return state.omega / cfg.inertia


def energy_rate(gradient: np.ndarray, xi_dot: np.ndarray) -> float:
    """``<dH, xi_dot>``: the time derivative of the energy along the flow."""
    return float(np.dot(gradient, xi_dot))
