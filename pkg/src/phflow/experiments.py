"""End-to-end experiments: linear classifier runs, regularisation sweep, Duffing
vector-field reconstruction and a gradient-descent comparison on 2-D landscapes.

Each ``run_*`` function takes a fully resolved config dict (see
:func:`resolve_config`) and an output directory, writes its CSV/JSON
artifacts there and returns the summary dict.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import DuffingSpec, duffing_dataset, duffing_field, gaussian_blobs, make_rng, split, write_csv_rows
from .metrics import accuracy, decision_grid, error_field, pointwise_error, relative_error
from .net import NetworkSpec, forward
from .ode import IntegratorConfig, TrajectoryRecord
from .phdyn import PHConfig, PHState
from .train import GDConfig, SequentialConfig, gradient_descent, ph_flow, train_batch, train_sequential

__all__ = [
    "EXPERIMENTS",
    "DEFAULTS",
    "resolve_config",
    "run_experiment",
    "run_linear_single",
    "run_beta_sweep",
    "run_linear_sequential",
    "run_duffing_batch",
    "run_gd_compare",
    "Landscape",
]

# published initial condition for the linear classifier: 6 parameters then 6 momenta
XI0_LINEAR = [0.6, -2.3, -0.1, -1.1, -1.2, 0.3, -1.2, 0.3, 0.2, 1.6, -0.4, 1.6]

_LINEAR_NET = {"layer_widths": [2, 2], "activations": [{"kind": "identity"}]}
_PH = {"alpha": 1.0, "beta": 0.0, "damping": 1.0, "inertia": 1.0, "injection_gain": 0.0}
_RK45 = IntegratorConfig().to_dict()

DEFAULTS = {
    "linear_single": {
        "seed": 0,
        "network": _LINEAR_NET,
        "ph": _PH,
        "integrator": dict(_RK45, record_every=0.05),
        "sample": {"u": [0.6, 0.6], "y": [1.0, 0.0]},
        "xi0": XI0_LINEAR,
        "t_final": 5.0,
    },
    "beta_sweep": {
        "seed": 0,
        "network": _LINEAR_NET,
        "ph": _PH,
        "integrator": dict(_RK45, record_every=5.0),
        "sample": {"u": [0.6, 0.6], "y": [1.0, 0.0]},
        "xi0": XI0_LINEAR,
        "t_final": 5.0,
        "sweep": {"beta_min": 0.0, "beta_max": 3.0, "n_points": 100},
    },
    "linear_sequential": {
        "seed": 1,
        "network": _LINEAR_NET,
        "ph": dict(_PH, beta=0.001, damping=100.0),
        # B = 100 makes the momenta stiff; RK4 at h*B = 1 is stable and matches rk45 to ~1e-8 here
        "integrator": dict(_RK45, method="rk4_fixed", dt=0.01, record_every=0.1),
        "trainer": {"t_star": 0.1, "epochs": 100},
        "data": {
            "n_per_class": 1000, "mean1": [1.0, 1.0], "mean2": [-1.0, -1.0], "sigma": 0.4,
            "split_ratio": 0.75, "split_seed": 2,
        },
        "xi0": XI0_LINEAR,
        "grid": {"domain": [[-3.0, 3.0], [-3.0, 3.0]], "resolution": [50, 50]},
        "output": {"trajectory_stride": 150},
    },
    "duffing_batch": {
        "seed": 7,
        "network": {
            "layer_widths": [2, 16, 16, 2],
            "activations": [{"kind": "softplus", "gamma": 10.0}] * 2 + [{"kind": "identity"}],
        },
        "ph": dict(_PH, damping=0.5),
        "integrator": dict(_RK45, record_every=0.5),
        "t_total": 100.0,
        "data": {"x_start": 0.0, "x_end": 8.0, "n_samples": 400, "u0": [1.5, 1.0]},
        "grid": {"domain": [[-1.0, 1.5], [-1.9, 1.0]], "resolution": [50, 50]},
        "convergence": {"time": 30.0, "velocity_tol": 1e-2},
    },
    "gd_compare": {
        "seed": 3,
        "landscape": {"kind": "quadratic", "matrix": [[3.0, 0.5], [0.5, 1.0]], "center": [1.0, -0.5]},
        "theta0": [-1.5, 1.5],
        "gd": {"step_size": 0.1, "steps": 200},
        "ph": dict(_PH, damping=2.0),
        "integrator": dict(_RK45, record_every=0.1),
        "t_total": 20.0,
    },
}
EXPERIMENTS = tuple(DEFAULTS)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_path(cfg, dotted, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise KeyError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise KeyError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def resolve_config(experiment: str, file_config: dict | None = None, overrides: dict | None = None,
                   seed: int | None = None) -> dict:
    """Defaults, then the config file, then ``--set`` overrides, then ``--seed``.

    A manifest written by a previous run is accepted as a config file.
    Unknown keys are rejected.
    """
    if experiment not in DEFAULTS:
        raise KeyError(f"unknown experiment {experiment!r}")
    file_config = dict(file_config or {})
    if "config" in file_config and "experiment" in file_config:
        if file_config["experiment"] != experiment:
            raise ValueError(f"manifest is for {file_config['experiment']!r}, not {experiment!r}")
        file_config = file_config["config"]
    cfg = copy.deepcopy(DEFAULTS[experiment])
    for key in file_config:
        if key not in cfg:
            raise KeyError(f"unknown config key {key!r}")
    cfg = _merge(cfg, file_config)
    for k, v in (overrides or {}).items():
        _set_path(cfg, k, v)
    if seed is not None:
        cfg["seed"] = int(seed)
    _validate(experiment, cfg)
    return cfg


def _validate(experiment, cfg):
    # constructing the typed configs runs their invariant checks
    if "network" in cfg:
        NetworkSpec.from_dict(cfg["network"])
    PHConfig.from_dict(cfg["ph"])
    IntegratorConfig.from_dict(cfg["integrator"])
    if experiment == "linear_sequential":
        SequentialConfig(**cfg["trainer"])
    if experiment == "beta_sweep" and cfg["sweep"]["n_points"] < 1:
        raise ValueError("sweep needs at least one point")
    if experiment == "gd_compare" and (cfg["gd"]["steps"] < 0 or cfg["t_total"] < 0):
        raise ValueError("steps and t_total must be non-negative")


def _write_manifest(out: Path, experiment: str, cfg: dict):
    manifest = {"experiment": experiment, "version": __version__, "config": cfg}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _state_columns(p):
    return [f"theta{i + 1}" for i in range(p)] + [f"omega{i + 1}" for i in range(p)]


# -- linear classifier, single sample ------------------------------------------------------------

def _single_run(cfg, beta=None):
    spec = NetworkSpec.from_dict(cfg["network"])
    ph = dict(cfg["ph"])
    if beta is not None:
        ph["beta"] = beta
    ph_cfg = PHConfig.from_dict(ph)
    u = np.asarray(cfg["sample"]["u"], dtype=float)
    y = np.asarray(cfg["sample"]["y"], dtype=float)
    state0 = PHState.from_xi(cfg["xi0"])
    icfg = IntegratorConfig.from_dict(cfg["integrator"])
    final, rec = train_batch(spec, ph_cfg, icfg, (u[None, :], y[None, :]), state0, cfg["t_final"])
    y_final = forward(spec, final.theta, u)
    return spec, rec, {
        "relative_error": relative_error(y, y_final),
        "theta_norm": float(np.linalg.norm(final.theta)),
        "final_hamiltonian": float(rec.hamiltonians[-1]),
        "output": y_final.tolist(),
    }


def run_linear_single(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "linear_single", cfg)
    spec, rec, summary = _single_run(cfg)
    u = np.asarray(cfg["sample"]["u"], dtype=float)
    outs = np.array([forward(spec, th, u) for th in rec.thetas])
    header = ["t"] + _state_columns(rec.p) + [f"y{i + 1}" for i in range(outs.shape[1])] + ["J"]
    rows = (np.concatenate([[t], x, yv, [h]]) for t, x, yv, h in zip(rec.times, rec.states, outs, rec.hamiltonians))
    write_csv_rows(out / "trajectory.csv", header, rows)
    _write_json(out / "summary.json", summary)
    return summary


# -- regularisation sweep -----------------------------------------------------------------------

def _threads(n):
    env = os.environ.get("PHFLOW_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n))


def run_beta_sweep(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "beta_sweep", cfg)
    sw = cfg["sweep"]
    betas = np.linspace(sw["beta_min"], sw["beta_max"], sw["n_points"])
    with ThreadPoolExecutor(max_workers=_threads(len(betas))) as pool:
        # map yields in submission order, so rows stay sorted by beta
        results = list(pool.map(lambda b: _single_run(cfg, float(b))[2], betas))
    err = np.array([r["relative_error"] for r in results])
    norm = np.array([r["theta_norm"] for r in results])
    write_csv_rows(out / "sweep.csv", ["beta", "relative_error", "theta_norm"], zip(betas, err, norm))
    summary = {
        "n_points": len(betas),
        "relative_error_first": float(err[0]),
        "relative_error_last": float(err[-1]),
        "theta_norm_first": float(norm[0]),
        "theta_norm_last": float(norm[-1]),
        "relative_error_decreases": int(np.sum(np.diff(err) < 0)),
        "theta_norm_increases": int(np.sum(np.diff(norm) > 0)),
    }
    _write_json(out / "summary.json", summary)
    return summary


# -- linear classifier, sequential training on blobs -------------------------------------------

def run_linear_sequential(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "linear_sequential", cfg)
    d = cfg["data"]
    blobs = gaussian_blobs(cfg["seed"], d["n_per_class"], d["mean1"], d["mean2"], d["sigma"])
    ds = split(blobs, d["split_ratio"], d["split_seed"])
    spec = NetworkSpec.from_dict(cfg["network"])
    final, losses, rec = train_sequential(
        spec, PHConfig.from_dict(cfg["ph"]), SequentialConfig(**cfg["trainer"]),
        IntegratorConfig.from_dict(cfg["integrator"]), ds.subset("train"), PHState.from_xi(cfg["xi0"]),
    )
    write_csv_rows(out / "loss.csv", ["epoch", "loss"], ((i + 1, v) for i, v in enumerate(losses)))
    _write_trajectory(out / "trajectory.csv", rec, cfg["output"]["trajectory_stride"])
    grid = decision_grid(spec, final.theta, cfg["grid"]["domain"], cfg["grid"]["resolution"])
    grid.to_csv(out / "decision_grid.csv")
    summary = {
        "test_accuracy": accuracy(spec, final.theta, ds, "test"),
        "train_accuracy": accuracy(spec, final.theta, ds, "train"),
        "n_train": int(len(ds.train_idx)),
        "n_test": int(len(ds.test_idx)),
        "final_loss": float(losses[-1]),
        "epoch_loss_increases": int(np.sum(np.diff(losses) > 0)),
        "theta": final.theta.tolist(),
    }
    _write_json(out / "summary.json", summary)
    return summary


def _write_trajectory(path, rec: TrajectoryRecord, stride=1):
    idx = np.arange(0, len(rec), max(1, int(stride)))
    if idx[-1] != len(rec) - 1:
        idx = np.append(idx, len(rec) - 1)
    header = ["t", "segment"] + _state_columns(rec.p) + ["J", "dJdt"]
    rows = (
        [rec.times[i], int(rec.segments[i]), *rec.states[i], rec.hamiltonians[i], rec.dissipation_rates[i]]
        for i in idx
    )
    write_csv_rows(path, header, rows)


# -- Duffing vector field -----------------------------------------------------------------------

def _saddle_diagnostic(times, rates):
    """First local maximum of the dissipation magnitude after its initial decay, if any."""
    mag = np.abs(rates)
    for i in range(1, len(mag) - 1):
        if mag[i] < mag[i - 1]:
            break
    else:
        return None
    for j in range(i + 1, len(mag) - 1):
        if mag[j] > mag[j - 1] and mag[j] >= mag[j + 1]:
            return {"time": float(times[j]), "dissipation_magnitude": float(mag[j])}
    return None


def run_duffing_batch(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "duffing_batch", cfg)
    d = cfg["data"]
    ds = duffing_dataset(DuffingSpec(d["x_start"], d["x_end"], d["n_samples"], tuple(d["u0"])))
    spec = NetworkSpec.from_dict(cfg["network"])
    ph = PHConfig.from_dict(cfg["ph"])
    p = spec.parameter_count
    rng = make_rng(cfg["seed"])
    theta0 = rng.standard_normal(p)
    velocity0 = rng.random(p)
    state0 = PHState(theta0, ph.inertia * velocity0)
    final, rec = train_batch(spec, ph, IntegratorConfig.from_dict(cfg["integrator"]), ds, state0, cfg["t_total"])

    _write_trajectory(out / "trajectory.csv", rec)
    write_csv_rows(out / "loss.csv", ["t", "J", "dJdt"], zip(rec.times, rec.hamiltonians, rec.dissipation_rates))
    ef = error_field(spec, final.theta, cfg["grid"]["domain"], cfg["grid"]["resolution"], duffing_field)
    ef.to_csv(out / "error_field.csv")

    conv = cfg["convergence"]
    i_conv = int(np.argmin(np.abs(rec.times - conv["time"])))
    speeds = np.abs(rec.omegas[i_conv] / ph.inertia)
    train_err = pointwise_error(spec, final.theta, ds.inputs, duffing_field)
    summary = {
        "parameter_count": p,
        "initial_loss": float(rec.hamiltonians[0]),
        "final_loss": float(rec.hamiltonians[-1]),
        "loss_strictly_decreasing": bool(np.all(np.diff(rec.hamiltonians) < 0)),
        "converged_fraction": float(np.mean(speeds < conv["velocity_tol"])),
        "converged_fraction_time": float(rec.times[i_conv]),
        "error_grid_mean": ef.mean,
        "error_grid_max": ef.max,
        "error_train_mean": float(np.mean(train_err)),
        "saddle_transit": _saddle_diagnostic(rec.times, rec.dissipation_rates),
    }
    _write_json(out / "summary.json", summary)
    return summary


# -- gradient descent vs. PH flow on a 2-D landscape -----------------------------------------

class Landscape:
    """Scalar potential on R^2 returning ``(J, grad J)``.

    ``quadratic``: ``0.5 (x - c)^T A (x - c)``.
    ``double_well``: ``(x1^2 - 1)^2 + 0.5 * curvature * x2^2 + tilt * x1``.
    """

    def __init__(self, kind="quadratic", **params):
        self.kind = kind
        if kind == "quadratic":
            self.A = np.asarray(params.get("matrix", [[1.0, 0.0], [0.0, 1.0]]), dtype=float)
            self.c = np.asarray(params.get("center", [0.0, 0.0]), dtype=float)
            if self.A.shape != (2, 2) or not np.allclose(self.A, self.A.T):
                raise ValueError("quadratic landscape needs a symmetric 2x2 matrix")
            if np.any(np.linalg.eigvalsh(self.A) <= 0):
                raise ValueError("quadratic landscape matrix must be positive definite")
        elif kind == "double_well":
            self.curvature = float(params.get("curvature", 1.0))
            self.tilt = float(params.get("tilt", 0.0))
        else:
            raise ValueError(f"unknown landscape {kind!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("kind"), **d)

    def minimizer(self):
        if self.kind != "quadratic":
            raise ValueError("closed-form minimiser only for the quadratic landscape")
        return self.c.copy()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            d = x - self.c
            g = self.A @ d
            return 0.5 * float(d @ g), g
        x1, x2 = x
        J = (x1 * x1 - 1.0) ** 2 + 0.5 * self.curvature * x2 * x2 + self.tilt * x1
        g = np.array([4.0 * x1 * (x1 * x1 - 1.0) + self.tilt, self.curvature * x2])
        return float(J), g


def run_gd_compare(cfg: dict, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, "gd_compare", cfg)
    land = Landscape.from_dict(cfg["landscape"])
    theta0 = cfg["theta0"]
    if theta0 is None:
        theta0 = make_rng(cfg["seed"]).uniform(-2.0, 2.0, 2)
    theta0 = np.asarray(theta0, dtype=float)

    g = cfg["gd"]
    if g["steps"] > 0:
        iterates, losses = gradient_descent(land, theta0, GDConfig(g["step_size"], g["steps"]))
    else:
        iterates, losses = theta0[None, :], np.array([land(theta0)[0]])
    write_csv_rows(out / "gd.csv", ["step", "theta1", "theta2", "J"],
                   ([k, *iterates[k], losses[k]] for k in range(len(losses))))

    ph = PHConfig.from_dict(cfg["ph"])
    final, rec = ph_flow(land, ph, PHState.at_rest(theta0), cfg["t_total"],
                         IntegratorConfig.from_dict(cfg["integrator"]))
    _write_trajectory(out / "trajectory.csv", rec)
    summary = {
        "theta0": theta0.tolist(),
        "gd_final": iterates[-1].tolist(),
        "gd_final_loss": float(losses[-1]),
        "ph_final": final.theta.tolist(),
        "ph_final_loss": float(land(final.theta)[0]),
        "initial_loss": float(land(theta0)[0]),
    }
    if land.kind == "quadratic":
        xstar = land.minimizer()
        summary["gd_distance_to_minimum"] = float(np.linalg.norm(iterates[-1] - xstar))
        summary["ph_distance_to_minimum"] = float(np.linalg.norm(final.theta - xstar))
    _write_json(out / "summary.json", summary)
    return summary


RUNNERS = {
    "linear_single": run_linear_single,
    "beta_sweep": run_beta_sweep,
    "linear_sequential": run_linear_sequential,
    "duffing_batch": run_duffing_batch,
    "gd_compare": run_gd_compare,
}


def run_experiment(experiment: str, cfg: dict, out) -> dict:
    return RUNNERS[experiment](cfg, out)
