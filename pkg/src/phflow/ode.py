"""Explicit integrators for autonomous flows on flat state vectors.

Two methods: classical fixed-step RK4 and the Dormand-Prince 5(4) embedded
pair with a PI step-size controller. Both land exactly on every recording
time and on ``t_end``; a step that would overshoot is shortened.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "IntegratorConfig",
    "TrajectoryRecord",
    "IntegrationError",
    "DivergenceError",
    "NonFiniteStateError",
    "integrate",
]

Field = Callable[[np.ndarray], np.ndarray]
EnergyFn = Callable[[np.ndarray], "tuple[float, float]"]


class IntegrationError(RuntimeError):
    pass


class DivergenceError(IntegrationError):
    """Raised when the step budget is exhausted before reaching ``t_end``."""


class NonFiniteStateError(IntegrationError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"non-finite state component at t={t:.6g}")


@dataclass
class IntegratorConfig:
    method: str = "rk45_adaptive"
    dt: float = 1e-3
    rtol: float = 1e-6
    atol: float = 1e-8
    max_steps: int = 10**7
    record_every: float = 0.1

    def __post_init__(self):
        if self.method not in ("rk4_fixed", "rk45_adaptive"):
            raise ValueError(f"unknown integration method {self.method!r}")
        for name in ("dt", "rtol", "atol", "record_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        return cls(**d)


@dataclass
class TrajectoryRecord:
    """Sampled trajectory. ``states`` has one row per time, ``xi = (theta, omega)``.

    ``segments`` tags each sample with the index of the flow segment it belongs
    to (all zeros for a single integration).
    """

    times: np.ndarray
    states: np.ndarray
    hamiltonians: np.ndarray
    dissipation_rates: np.ndarray
    segments: Optional[np.ndarray] = None
    next_step: float = math.nan

    def __post_init__(self):
        if self.segments is None:
            self.segments = np.zeros(len(self.times), dtype=int)

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def p(self) -> int:
        return self.states.shape[1] // 2

    @property
    def thetas(self) -> np.ndarray:
        return self.states[:, : self.p]

    @property
    def omegas(self) -> np.ndarray:
        return self.states[:, self.p:]

    @classmethod
    def concatenate(cls, records: list["TrajectoryRecord"]) -> "TrajectoryRecord":
        """Join consecutive records, dropping each record's first sample after the first.

        Consecutive records are expected to share their boundary sample (the
        end of one segment is the start of the next).
        """
        if not records:
            raise ValueError("nothing to concatenate")
        parts = [records[0]] + [
            cls(r.times[1:], r.states[1:], r.hamiltonians[1:], r.dissipation_rates[1:], r.segments[1:])
            for r in records[1:]
        ]
        return cls(
            np.concatenate([r.times for r in parts]),
            np.concatenate([r.states for r in parts]),
            np.concatenate([r.hamiltonians for r in parts]),
            np.concatenate([r.dissipation_rates for r in parts]),
            np.concatenate([r.segments for r in parts]),
        )


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# difference between the 5th and embedded 4th order weights
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents for a 5(4) pair
_K_I = 0.7 / 5
_K_P = 0.4 / 5


def _rk4_step(f, y, h, k1):
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_A_ROWS = [np.array(a + (0.0,) * (7 - len(a))) for a in _A]
_E_ROW = np.array(_E)


def _dp_step(f, y, h, K):
    """One Dormand-Prince step; ``K[0]`` holds f(y) on entry.

    Fills ``K[1:]`` and returns ``(y_new, error estimate)``; ``K[6]`` is then
    f(y_new) (first-same-as-last).
    """
    for i in range(1, 6):
        K[i] = f(y + h * (_A_ROWS[i][:i] @ K[:i]))
    y_new = y + h * (_A_ROWS[6][:6] @ K[:6])
    K[6] = f(y_new)
    return y_new, h * (_E_ROW @ K)


def _initial_step(f, y, f0, rtol, atol, span):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _record_times(t_start, t_end, every):
    n = int(math.floor((t_end - t_start) / every + 1e-9))
    ts = [t_start + j * every for j in range(1, n + 1)]
    if ts and t_end - ts[-1] <= 1e-12 * max(1.0, abs(t_end)):
        ts[-1] = t_end
    else:
        ts.append(t_end)
    return ts


def integrate(field: Field, state0, t_start: float, t_end: float, cfg: IntegratorConfig,
              energy: Optional[EnergyFn] = None, first_step: Optional[float] = None) -> TrajectoryRecord:
    """Integrate ``x' = field(x)`` from ``t_start`` to exactly ``t_end``.

    ``energy`` maps a state to ``(H, dH/dt)``; when omitted the energy columns
    of the record are NaN. ``first_step`` overrides the adaptive method's
    initial step guess (e.g. the ``next_step`` of a preceding record). Raises
    :class:`DivergenceError` when ``max_steps`` is exceeded or the adaptive
    step underflows, and :class:`NonFiniteStateError` when the state blows up.
    """
    # finiteness is checked explicitly after every step
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(field, state0, t_start, t_end, cfg, energy, first_step)


def _integrate(field, state0, t_start, t_end, cfg, energy, first_step):
    y = np.array(state0, dtype=float)
    if y.ndim != 1:
        raise ValueError("state must be a flat vector")
    if not t_end >= t_start:
        raise ValueError("t_end must not precede t_start")
    f0 = np.asarray(field(y), dtype=float)
    if f0.shape != y.shape:
        raise ValueError(f"field returned shape {f0.shape} for a state of shape {y.shape}")

    def sample(x):
        return energy(x) if energy is not None else (math.nan, math.nan)

    times = [t_start]
    states = [y.copy()]
    energies = [sample(y)]
    if t_end == t_start:
        return _pack(times, states, energies)

    targets = _record_times(t_start, t_end, cfg.record_every)
    adaptive = cfg.method == "rk45_adaptive"
    t = t_start
    k1 = f0
    steps = 0
    if adaptive:
        if first_step is not None and first_step > 0:
            h = first_step
        else:
            h = _initial_step(field, y, k1, cfg.rtol, cfg.atol, t_end - t_start)
        err_prev = 1e-4
        K = np.empty((7, y.size))
        K[0] = k1
        inv_n = 1.0 / y.size
    else:
        h = cfg.dt

    for target in targets:
        while t < target:
            if steps >= cfg.max_steps:
                raise DivergenceError(f"step budget of {cfg.max_steps} exhausted at t={t:.6g}")
            step = h
            landing = t + step >= target - 1e-12 * max(1.0, abs(target))
            if landing:
                step = target - t
            if not adaptive:
                y_new = _rk4_step(field, y, step, k1)
                k_new = field(y_new)
                steps += 1
            else:
                y_new, err_vec = _dp_step(field, y, step, K)
                steps += 1
                e = err_vec / (cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new)))
                err = math.sqrt(float(e @ e) * inv_n)
                if not math.isfinite(err):
                    err = math.inf
                if err > 1.0:
                    if not np.all(np.isfinite(y)):
                        raise NonFiniteStateError(t)
                    h = step * max(_MIN_FACTOR, _SAFETY * err ** (-1 / 5))
                    if h < 1e-14 * max(1.0, abs(t)):
                        if not np.all(np.isfinite(y_new)):
                            raise NonFiniteStateError(t + step)
                        raise DivergenceError(f"step size underflow at t={t:.6g}")
                    continue
                factor = _SAFETY * max(err, 1e-10) ** (-_K_I) * err_prev ** _K_P
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                err_prev = max(err, 1e-4)
                # a step shortened to land on a record time keeps the previous proposal
                if not (landing and step < h):
                    h = step * factor
                k_new = K[6].copy()
                K[0] = k_new
            if not np.all(np.isfinite(y_new)):
                raise NonFiniteStateError(t + step)
            t = target if landing else t + step
            y = y_new
            k1 = k_new
        times.append(t)
        states.append(y.copy())
        energies.append(sample(y))
    rec = _pack(times, states, energies)
    rec.next_step = h
    return rec


def _pack(times, states, energies):
    e = np.array(energies, dtype=float).reshape(len(times), 2)
    return TrajectoryRecord(np.array(times), np.array(states), e[:, 0].copy(), e[:, 1].copy())
