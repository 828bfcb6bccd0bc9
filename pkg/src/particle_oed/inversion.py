"""Inner reconstruction problem over the empirical measure.

``Loss(sigma) = (1/N) sum_i (M(theta_i; sigma) - data_i)^2`` together with its
gradient, Hessian, the mixed derivative with respect to particle positions,
plain gradient descent, and the implicit-function velocity of the optimum
under a prescribed particle motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import DEFAULT_COND_CAP, SymmetricSolver
from .core import Ensemble, ForwardModel, observed_data, observed_data_grad, pairwise_gram, pairwise_sum
from .errors import NonFiniteParameter, SingularHessian

MODES = ("full", "gauss-newton")


@dataclass(frozen=True)
class LossReport:
    loss: float
    grad_norm: float


def residuals(sigma, ensemble: Ensemble, model: ForwardModel) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    return model.evaluate(ensemble.coords, ensemble.channels, sigma) - observed_data(model, ensemble)


def loss(sigma, ensemble: Ensemble, model: ForwardModel) -> float:
    r = residuals(sigma, ensemble, model)
    return float(pairwise_sum(r * r) / ensemble.size)


def loss_grad(sigma, ensemble: Ensemble, model: ForwardModel) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    r = residuals(sigma, ensemble, model)
    g = model.grad_sigma(ensemble.coords, ensemble.channels, sigma)
    return 2.0 * pairwise_sum(g * r[:, None]) / ensemble.size


def loss_report(sigma, ensemble: Ensemble, model: ForwardModel) -> LossReport:
    return LossReport(loss(sigma, ensemble, model), float(np.linalg.norm(loss_grad(sigma, ensemble, model))))


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown Hessian mode {mode!r}; expected one of {MODES}")


def loss_hessian(sigma, ensemble: Ensemble, model: ForwardModel, mode: str = "full") -> np.ndarray:
    """Gauss-Newton part ``(2/N) sum g g^T``, plus ``(2/N) sum Hess_sigma M * r`` in full mode."""
    _check_mode(mode)
    sigma = np.asarray(sigma, dtype=float)
    n = ensemble.size
    g = model.grad_sigma(ensemble.coords, ensemble.channels, sigma)
    hess = 2.0 * pairwise_gram(g) / n
    if mode == "full":
        second = model.hess_sigma(ensemble.coords, ensemble.channels, sigma)
        r = residuals(sigma, ensemble, model)
        hess = hess + 2.0 * pairwise_sum(second * r[:, None, None]) / n
    return 0.5 * (hess + hess.T)


def grad_loss_partial_theta_all(sigma, ensemble: Ensemble, model: ForwardModel, mode: str = "full") -> np.ndarray:
    """``d(grad_sigma Loss)/d theta_i`` for every particle, shape ``(N, d, k)``.

    Rows index sigma, columns index the continuous design coordinates.
    """
    _check_mode(mode)
    sigma = np.asarray(sigma, dtype=float)
    c, ch = ensemble.coords, ensemble.channels
    g = model.grad_sigma(c, ch, sigma)
    mismatch = model.grad_theta(c, ch, sigma) - observed_data_grad(model, ensemble)
    out = np.einsum("nd,nk->ndk", g, mismatch)
    if mode == "full":
        r = residuals(sigma, ensemble, model)
        out = out + model.grad_theta_grad_sigma(c, ch, sigma) * r[:, None, None]
    return 2.0 * out / ensemble.size


def grad_loss_partial_theta(sigma, ensemble: Ensemble, model: ForwardModel, i: int, mode: str = "full") -> np.ndarray:
    return grad_loss_partial_theta_all(sigma, ensemble, model, mode)[i]


def inner_gd(sigma0, ensemble: Ensemble, model: ForwardModel, iterations: int, step: float,
             tol: float | None = None) -> np.ndarray:
    """Plain gradient descent ``sigma <- sigma - step * grad Loss``.

    Stops early once ``||grad Loss|| < tol`` when ``tol`` is given.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    sigma = np.array(sigma0, dtype=float)
    for it in range(iterations):
        grad = loss_grad(sigma, ensemble, model)
        if tol is not None and np.linalg.norm(grad) < tol:
            break
        sigma = sigma - step * grad
        if not np.all(np.isfinite(sigma)):
            raise NonFiniteParameter(f"inner gradient descent produced a non-finite parameter at step {it}")
    return sigma


def hessian_solver(hess, cond_cap: float = DEFAULT_COND_CAP) -> SymmetricSolver:
    return SymmetricSolver(hess, SingularHessian, cond_cap, positive=False, what="loss Hessian")


def sigma_velocity(sigma, ensemble: Ensemble, particle_velocities: np.ndarray, model: ForwardModel,
                   mode: str = "full", cond_cap: float = DEFAULT_COND_CAP) -> np.ndarray:
    """Rate of change of the inner optimum under particle motion ``particle_velocities`` (N, k).

    Solves ``Hess Loss * x = -sum_i d(grad Loss)/d theta_i * thetadot_i``.
    """
    v = np.asarray(particle_velocities, dtype=float).reshape(ensemble.coords.shape)
    partial = grad_loss_partial_theta_all(sigma, ensemble, model, mode)
    rhs = pairwise_sum(np.einsum("ndk,nk->nd", partial, v))
    if not np.any(rhs):
        return np.zeros_like(rhs)
    solver = hessian_solver(loss_hessian(sigma, ensemble, model, mode), cond_cap)
    return -solver.solve(rhs)
