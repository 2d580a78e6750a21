"""Training drivers: sequential (hybrid automaton), batch, and plain gradient descent."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .net import NetworkSpec
from .ode import DivergenceError, IntegrationError, IntegratorConfig, TrajectoryRecord, integrate
from .phdyn import NetworkPotential, PHConfig, PHState, PHSystem, Potential, _batch_arrays

__all__ = [
    "SequentialConfig",
    "GDConfig",
    "train_sequential",
    "train_batch",
    "train_gd",
    "gradient_descent",
    "ph_flow",
]


@dataclass
class SequentialConfig:
    """Dwell time per sample and number of passes over the data.

    The state is always carried across sample switches.
    """

    t_star: float = 0.1
    epochs: int = 1

    def __post_init__(self):
        if not self.t_star > 0:
            raise ValueError("t_star must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class GDConfig:
    step_size: float = 0.1
    steps: int = 100

    def __post_init__(self):
        if not self.step_size > 0 or self.steps < 1:
            raise ValueError("step_size and steps must be positive")

    def to_dict(self):
        return asdict(self)


def _check_state(spec: NetworkSpec, state0: PHState):
    if state0.p != spec.parameter_count:
        raise ValueError(f"state has {state0.p} parameters, network needs {spec.parameter_count}")


def _annotate(err: IntegrationError, epoch: int, sample: int) -> IntegrationError:
    err.epoch = epoch
    err.sample = sample
    err.args = (f"{err.args[0] if err.args else err} (epoch {epoch}, sample {sample})",)
    return err


def train_sequential(spec: NetworkSpec, cfg: PHConfig, seq: SequentialConfig, icfg: IntegratorConfig,
                     dataset, state0: PHState):
    """Run the update-and-converge automaton.

    For every epoch the samples are visited in order; each one drives the flow
    for ``t_star`` time units, after which the timer resets, the counter
    advances and the state is carried over unchanged. After the last sample
    the counter wraps to the first sample.

    Returns ``(final_state, epoch_losses, trajectory)``; ``epoch_losses[e]`` is
    the batch energy over the whole dataset at the end of epoch ``e``. The
    trajectory's ``segments`` column holds the global jump counter and its
    energies are those of the sample active on that segment.
    """
    U, Y = _batch_arrays(dataset)
    _check_state(spec, state0)
    p = spec.parameter_count
    systems = [
        PHSystem(NetworkPotential(spec, U[i:i + 1], Y[i:i + 1], cfg.alpha, cfg.beta), cfg, p)
        for i in range(len(U))
    ]
    full = PHSystem(NetworkPotential(spec, U, Y, cfg.alpha, cfg.beta), cfg, p)
    rec_cfg = IntegratorConfig(icfg.method, icfg.dt, icfg.rtol, icfg.atol, icfg.max_steps,
                               min(icfg.record_every, seq.t_star))

    xi = state0.xi
    t0 = 0.0
    records = []
    epoch_losses = np.empty(seq.epochs)
    jump = 0
    h = None
    for epoch in range(seq.epochs):
        for zeta, system in enumerate(systems):
            try:
                rec = integrate(system.field, xi, t0, t0 + seq.t_star, rec_cfg, system.energy_and_rate,
                                first_step=h)
            except IntegrationError as err:
                raise _annotate(err, epoch, zeta) from None
            rec.segments[:] = jump
            records.append(rec)
            xi = rec.final_state
            t0 = rec.times[-1]
            h = rec.next_step
            jump += 1
        epoch_losses[epoch] = full.energy(xi).hamiltonian
    return PHState.from_xi(xi), epoch_losses, TrajectoryRecord.concatenate(records)


def train_batch(spec: NetworkSpec, cfg: PHConfig, icfg: IntegratorConfig, dataset, state0: PHState,
                t_total: float):
    """Integrate the flow of the dataset-averaged energy for ``t_total`` time units."""
    U, Y = _batch_arrays(dataset)
    _check_state(spec, state0)
    if t_total < 0:
        raise ValueError("t_total must be non-negative")
    system = PHSystem(NetworkPotential(spec, U, Y, cfg.alpha, cfg.beta), cfg, spec.parameter_count)
    rec = integrate(system.field, state0.xi, 0.0, t_total, icfg, system.energy_and_rate)
    return PHState.from_xi(rec.final_state), rec


def ph_flow(potential: Potential, cfg: PHConfig, state0: PHState, t_total: float, icfg: IntegratorConfig):
    """Batch-style flow for an arbitrary potential ``theta -> (J, grad J)``."""
    system = PHSystem(potential, cfg, state0.p)
    rec = integrate(system.field, state0.xi, 0.0, t_total, icfg, system.energy_and_rate)
    return PHState.from_xi(rec.final_state), rec


def gradient_descent(potential: Potential, theta0, gd: GDConfig):
    """``theta <- theta - step_size * grad J(theta)``.

    Returns ``(iterates, losses)`` with ``steps + 1`` rows each, the first
    being the starting point.
    """
    theta = np.array(theta0, dtype=float)
    iterates = [theta.copy()]
    loss, grad = potential(theta)
    losses = [loss]
    for k in range(gd.steps):
        theta = theta - gd.step_size * grad
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = potential(theta)
        if not math.isfinite(loss) or not np.all(np.isfinite(theta)):
            raise DivergenceError(f"gradient descent diverged at step {k + 1}")
        iterates.append(theta.copy())
        losses.append(loss)
    return np.array(iterates), np.array(losses)


def train_gd(spec: NetworkSpec, dataset, gd: GDConfig, alpha: float, beta: float, theta0):
    """Full-batch gradient descent on the averaged network loss."""
    U, Y = _batch_arrays(dataset)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (spec.parameter_count,):
        raise ValueError(f"expected {spec.parameter_count} parameters, got shape {theta0.shape}")
    iterates, losses = gradient_descent(NetworkPotential(spec, U, Y, alpha, beta), theta0, gd)
    return iterates[-1], losses
