"""Empirical Fisher information, A-/D-optimal criteria and particle velocity fields.

With ``g = grad_sigma M(theta; sigma)`` and ``B = grad_theta grad_sigma M`` the
first variation of each criterion, differentiated in ``theta``, is

    A:  -2 B^T I^{-2} g        (F^A = trace(I^{-1}), minimized)
    D:  +2 B^T I^{-1} g        (F^D = log det I, maximized)

These are the raw fields; the flow module decides the direction of travel.
"""

from __future__ import annotations

import enum

import numpy as np

from ._linalg import DEFAULT_COND_CAP, SymmetricSolver, symmetrize
from .core import DesignPoint, Ensemble, ForwardModel, pairwise_gram
from .errors import SingularFisher


class Criterion(enum.Enum):
    A = "A"
    D = "D"

    @property
    def sign(self) -> int:
        """Direction of particle travel along the raw field: descend F^A, ascend F^D."""
        return -1 if self is Criterion.A else 1

    @classmethod
    def parse(cls, value) -> "Criterion":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().upper())


def fisher_from_gradients(grads: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    n, d = grads.shape
    fisher = symmetrize(pairwise_gram(grads) / n)
    if ridge:
        fisher = fisher + ridge * np.eye(d)
    return fisher


def fisher_empirical(ensemble: Ensemble, sigma, model: ForwardModel, ridge: float = 0.0) -> np.ndarray:
    """``(1/N) sum_i g_i g_i^T`` (+ ``ridge * I``), symmetrized."""
    grads = model.grad_sigma(ensemble.coords, ensemble.channels, np.asarray(sigma, dtype=float))
    return fisher_from_gradients(grads, ridge)


def fisher_solver(fisher, cond_cap: float = DEFAULT_COND_CAP) -> SymmetricSolver:
    return SymmetricSolver(fisher, SingularFisher, cond_cap, positive=True, what="Fisher matrix")


def criterion_value(kind, fisher, cond_cap: float = DEFAULT_COND_CAP) -> float:
    kind = Criterion.parse(kind)
    solver = fisher if isinstance(fisher, SymmetricSolver) else fisher_solver(fisher, cond_cap)
    if kind is Criterion.A:
        return float(np.trace(solver.solve(np.eye(solver.matrix.shape[0]))))
    return float(solver.logdet())


def velocity_field(kind, grads: np.ndarray, mixed: np.ndarray, solver: SymmetricSolver) -> np.ndarray:
    """Raw field at each particle from precomputed ``g`` (N, d) and ``B`` (N, d, k)."""
    kind = Criterion.parse(kind)
    w = solver.solve(grads.T)
    if kind is Criterion.A:
        w = -solver.solve(w)
    w = 2.0 * w.T
    return np.einsum("ndk,nd->nk", mixed, w)


def particle_velocities(kind, ensemble: Ensemble, sigma, model: ForwardModel, fisher=None,
                        ridge: float = 0.0, cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Raw field ``grad_theta dF/drho`` at every particle, shape ``(N, k)``."""
    sigma = np.asarray(sigma, dtype=float)
    grads = model.grad_sigma(ensemble.coords, ensemble.channels, sigma)
    if fisher is None:
        fisher = fisher_from_gradients(grads, ridge)
    solver = fisher if isinstance(fisher, SymmetricSolver) else fisher_solver(fisher, cond_cap)
    mixed = model.grad_theta_grad_sigma(ensemble.coords, ensemble.channels, sigma)
    return velocity_field(kind, grads, mixed, solver)


def particle_velocity(kind, point: DesignPoint, sigma, fisher, model: ForwardModel,
                      cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Raw field at a single design point for a given Fisher matrix."""
    sigma = np.asarray(sigma, dtype=float)
    coords = point.coords[None, :]
    channels = np.array([0 if point.channel is None else point.channel])
    grads = model.grad_sigma(coords, channels, sigma)
    mixed = model.grad_theta_grad_sigma(coords, channels, sigma)
    solver = fisher if isinstance(fisher, SymmetricSolver) else fisher_solver(fisher, cond_cap)
    return velocity_field(kind, grads, mixed, solver)[0]
