"""Linear baseline ``M(theta; sigma) = A(theta, :) sigma`` with a closed-form inner optimum."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .._linalg import SymmetricSolver
from ..core import Ensemble, ForwardModel, observed_data
from ..errors import SingularFisher


def monomial_rows(degree: int) -> tuple[Callable, Callable]:
    """Rows ``(1, t, ..., t^degree)`` and their derivative in ``t``."""
    powers = np.arange(degree + 1)

    def rows(t):
        return t[:, None] ** powers

    def drows(t):
        out = np.zeros((len(t), degree + 1))
        out[:, 1:] = powers[1:] * t[:, None] ** (powers[1:] - 1)
        return out

    return rows, drows


class LinearModel(ForwardModel):
    """One-dimensional design variable ``theta`` in ``[lower, upper]``.

    ``row_fn`` maps an array of ``theta`` values (N,) to rows (N, d) and
    ``row_deriv`` gives their ``theta``-derivative.  The default is the
    monomial basis of degree ``dim - 1`` on ``[-1, 1]``.
    """

    has_hess_sigma = True

    def __init__(self, dim: int = 3, truth=None, lower: float = -1.0, upper: float = 1.0,
                 noise_scale: float = 0.0, row_fn=None, row_deriv=None):
        if (row_fn is None) != (row_deriv is None):
            raise ValueError("row_fn and row_deriv must be given together")
        if row_fn is None:
            row_fn, row_deriv = monomial_rows(dim - 1)
        self.row_fn, self.row_deriv = row_fn, row_deriv
        self.dim_param = dim
        self.lower = np.array([lower], dtype=float)
        self.upper = np.array([upper], dtype=float)
        self.truth = np.ones(dim) if truth is None else np.asarray(truth, dtype=float)
        if self.truth.shape != (dim,):
            raise ValueError(f"truth must have length {dim}")
        self.noise_scale = noise_scale

    def rows(self, coords):
        return self.row_fn(np.asarray(coords, dtype=float)[:, 0])

    def evaluate(self, coords, channels, sigma):
        return self.rows(coords) @ np.asarray(sigma, dtype=float)

    def grad_sigma(self, coords, channels, sigma):
        return self.rows(coords)

    def grad_theta(self, coords, channels, sigma):
        return (self.row_deriv(np.asarray(coords, dtype=float)[:, 0]) @ np.asarray(sigma, dtype=float))[:, None]

    def grad_theta_grad_sigma(self, coords, channels, sigma):
        return self.row_deriv(np.asarray(coords, dtype=float)[:, 0])[:, :, None]

    def hess_sigma(self, coords, channels, sigma):
        return np.zeros((len(coords), self.dim_param, self.dim_param))


def linear_analytic_sigma(ensemble: Ensemble, model: LinearModel) -> np.ndarray:
    """Normal-equation optimum ``(A^T A[rho])^{-1} A^T data[rho]`` over the empirical measure."""
    a = model.rows(ensemble.coords)
    n = ensemble.size
    ata = a.T @ a / n
    atd = a.T @ observed_data(model, ensemble) / n
    return SymmetricSolver(ata, SingularFisher, what="A^T A[rho]").solve(atd)
