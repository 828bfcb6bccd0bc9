"""Outer-loop drivers: two-layer (brute-force), streamlined, and pinned-parameter benchmark.

Particles move by forward Euler along ``sign * grad_theta dF/drho`` with
``sign = -1`` for the A-criterion (descent on trace(I^{-1})) and ``+1`` for
the D-criterion (ascent on log det I), then are clamped to the model box.
Channels and noise realizations never change.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._linalg import DEFAULT_COND_CAP
from .core import Ensemble, ForwardModel, require_finite
from .criteria import Criterion, criterion_value, fisher_empirical, fisher_solver, particle_velocities
from .errors import OEDError
from .inversion import inner_gd, loss_report, sigma_velocity

ALGORITHMS = ("brute-force", "streamlined")


@dataclass(frozen=True)
class FlowConfig:
    kind: Criterion = Criterion.D
    algorithm: str = "streamlined"
    T: int = 100
    dt: float = 1e-3
    inner_T: int = 0
    inner_dt: float = 0.0
    ridge: float = 0.0
    hessian_mode: str | None = None
    cond_cap: float = DEFAULT_COND_CAP

    def __post_init__(self):
        object.__setattr__(self, "kind", Criterion.parse(self.kind))
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.dt < 0:
            raise ValueError("dt must be >= 0")
        if self.algorithm == "brute-force" and self.T > 0 and self.inner_T < 1:
            raise ValueError("brute-force needs inner_T >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    criterion: float
    sigma_error: float
    loss: float
    grad_norm: float
    wall_ms: float


@dataclass
class FlowResult:
    """Final state and one record per outer iteration ``1..T`` (the initial state is not included)."""

    ensemble: Ensemble
    sigma: np.ndarray
    records: list[IterationRecord]


Callback = Callable[[IterationRecord, Ensemble, np.ndarray], None]


def flow_step_particles(ensemble: Ensemble, sigma, kind, model: ForwardModel, dt: float,
                        ridge: float = 0.0, cond_cap: float = DEFAULT_COND_CAP):
    """One Euler step of the particles; returns ``(new_ensemble, realized_velocities)``.

    The realized velocity is the displacement over ``dt`` after clamping, so a
    particle pinned against the box contributes no motion to the sigma update.
    """
    kind = Criterion.parse(kind)
    velocity = kind.sign * particle_velocities(kind, ensemble, sigma, model, ridge=ridge, cond_cap=cond_cap)
    coords = model.project(ensemble.coords + dt * velocity)
    if dt > 0:
        velocity = (coords - ensemble.coords) / dt
    return ensemble.with_coords(coords), velocity


def measure(kind, ensemble: Ensemble, sigma, model: ForwardModel, iteration: int = 0, wall_ms: float = 0.0,
            ridge: float = 0.0, cond_cap: float = DEFAULT_COND_CAP) -> IterationRecord:
    """The four tracked quantities for one state of the flow."""
    fisher = fisher_empirical(ensemble, sigma, model, ridge)
    value = criterion_value(kind, fisher_solver(fisher, cond_cap))
    report = loss_report(sigma, ensemble, model)
    err = float(np.linalg.norm(np.asarray(sigma) - model.truth))
    return IterationRecord(iteration, value, err, report.loss, report.grad_norm, wall_ms)


def _drive(config: FlowConfig, ensemble: Ensemble, sigma, model: ForwardModel, update_sigma,
           callback: Callback | None):
    sigma = require_finite(np.array(sigma, dtype=float))
    records = []
    for it in range(1, config.T + 1):
        start = time.perf_counter()
        try:
            new_ensemble, velocity = flow_step_particles(ensemble, sigma, config.kind, model, config.dt,
                                                         config.ridge, config.cond_cap)
            sigma = require_finite(update_sigma(new_ensemble, sigma, velocity), iteration=it)
            ensemble = new_ensemble
            wall = 1e3 * (time.perf_counter() - start)
            rec = measure(config.kind, ensemble, sigma, model, it, wall, config.ridge, config.cond_cap)
        except OEDError as exc:
            raise exc.with_iteration(it)
        records.append(rec)
        if callback:
            callback(rec, ensemble, sigma)
    return FlowResult(ensemble, sigma, records)


def run_brute_force(config: FlowConfig, ensemble: Ensemble, sigma0, model: ForwardModel,
                    callback: Callback | None = None) -> FlowResult:
    """Two-layer flow: particle step, then ``inner_T`` warm-started gradient-descent steps."""

    def update(new_ensemble, sigma, velocity):
        return inner_gd(sigma, new_ensemble, model, config.inner_T, config.inner_dt)

    return _drive(config, ensemble, sigma0, model, update, callback)


def run_streamlined(config: FlowConfig, ensemble: Ensemble, sigma0, model: ForwardModel,
                    callback: Callback | None = None) -> FlowResult:
    """Particle step, then one implicit-function update of sigma at the moved particles."""
    mode = config.hessian_mode or model.default_hessian_mode

    def update(new_ensemble, sigma, velocity):
        rate = sigma_velocity(sigma, new_ensemble, velocity, model, mode, config.cond_cap)
        return sigma + config.dt * rate

    return _drive(config, ensemble, sigma0, model, update, callback)


def run_benchmark(config: FlowConfig, ensemble: Ensemble, model: ForwardModel,
                  callback: Callback | None = None) -> FlowResult:
    """Particle transport only, with sigma pinned to the model's ground truth."""
    truth = np.array(model.truth, dtype=float)
    return _drive(config, ensemble, truth, model, lambda e, s, v: s, callback)


def run(config: FlowConfig, ensemble: Ensemble, sigma0, model: ForwardModel,
        callback: Callback | None = None) -> FlowResult:
    if config.algorithm == "brute-force":
        return run_brute_force(config, ensemble, sigma0, model, callback)
    return run_streamlined(config, ensemble, sigma0, model, callback)


__all__ = [
    "FlowConfig", "IterationRecord", "FlowResult", "flow_step_particles", "measure",
    "run_brute_force", "run_streamlined", "run_benchmark", "run",
]
