from .linear import LinearModel, linear_analytic_sigma, monomial_rows
from .lorenz import Lorenz63, LorenzState, lorenz_simulate
from .schrodinger import GridOperator, Schrodinger1D, frechet_grad_sigma, profile, solve_with_delta

__all__ = [
    "LinearModel", "linear_analytic_sigma", "monomial_rows",
    "Lorenz63", "LorenzState", "lorenz_simulate",
    "GridOperator", "Schrodinger1D", "frechet_grad_sigma", "profile", "solve_with_delta",
]
