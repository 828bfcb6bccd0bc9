"""Steady 1-D Schrödinger-type boundary value problem with point sources.

    u'' + sigma(x) u = delta_s,   u(0) = u(1) = 0

The design variable is ``theta = (source, detector)`` in ``[0, 1]^2`` and the
observation is ``M(theta; sigma) = u_source(detector)``.  The potential is
piecewise constant on ``d`` equal cells (coefficients ``sigma_k``).

Discretization: ``n = d * refine`` unknowns at cell centres, Dirichlet data
imposed through a mirrored ghost value, so the discrete operator ``L`` is a
symmetric tridiagonal matrix.  A point source becomes a unit-mass hat load on
the two nearest nodes (the boundary points count as nodes with value zero),
and observations use the same hat weights.  Hence

    M = w(detector)^T L^{-1} w(source) / dx

which is exactly symmetric in its two arguments, and the sigma-gradient is
``-dx * sum_{j in cell k} u_j v_j`` with ``u, v`` the forward and adjoint
solutions.  The minus sign is the exact derivative of ``M`` (perturbing
``sigma`` by ``ds`` perturbs ``u`` by ``-L^{-1}(ds u)``).
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from scipy import linalg

from ..core import ForwardModel
from ..errors import SingularOperator

PROFILES = {
    # (weight, centre, width) terms of sum w exp(-((x - c) / s)^2) + offset
    "gaussA": (((1.0, 0.1, 0.2), (3.0, 0.7, 0.2)), 0.05),
    "gaussD": (((1.0, 0.2, 0.05), (3.0, 0.6, 0.05)), 0.05),
}


def gaussian_mixture(x, terms, offset=0.0):
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, offset)
    for w, c, s in terms:
        out += w * np.exp(-(((x - c) / s) ** 2))
    return out


def profile(name: str, d: int, terms=None, offset: float = 0.05) -> np.ndarray:
    """Cell-centre samples of a named (or custom) Gaussian-mixture potential."""
    if name != "custom":
        terms, offset = PROFILES[name]
    elif terms is None:
        raise ValueError("custom profile needs terms")
    return gaussian_mixture((np.arange(d) + 0.5) / d, terms, offset)


class GridOperator:
    """Discrete ``u'' + sigma u`` with homogeneous Dirichlet data, for one fixed ``sigma``."""

    def __init__(self, sigma, refine: int = 1, singular_tol: float = 1e-10):
        sigma = np.asarray(sigma, dtype=float)
        self.d = len(sigma)
        self.refine = int(refine)
        self.n = n = self.d * self.refine
        self.dx = dx = 1.0 / n
        self.nodes = (np.arange(n) + 0.5) * dx
        # node list including the two boundary points, used for hat weights
        self.extended = np.concatenate([[0.0], self.nodes, [1.0]])
        diag = np.full(n, -2.0 / dx**2) + np.repeat(sigma, self.refine)
        diag[0] -= 1.0 / dx**2
        diag[-1] -= 1.0 / dx**2
        off = np.full(n - 1, 1.0 / dx**2)
        self.diag, self.off = diag, off
        eig = linalg.eigvalsh_tridiagonal(diag, off)
        if np.min(np.abs(eig)) < singular_tol * np.max(np.abs(eig)):
            raise SingularOperator(f"operator is (near-)singular; smallest |eigenvalue| {np.min(np.abs(eig)):.3e}")
        self._banded = np.zeros((3, n))
        self._banded[0, 1:] = off
        self._banded[1] = diag
        self._banded[2, :-1] = off
        green = linalg.solve_banded((1, 1), self._banded, np.eye(n))
        green = 0.5 * (green + green.T)
        # pad with zero rows/columns for the boundary nodes
        self.green = np.zeros((n + 2, n + 2))
        self.green[1:-1, 1:-1] = green

    def apply(self, u):
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def hat(self, s):
        """Extended-node indices and weights (and ``s``-derivatives) of the hat at ``s``."""
        s = np.asarray(s, dtype=float)
        e = np.clip(np.searchsorted(self.extended, s, side="right") - 1, 0, self.n)
        left, right = self.extended[e], self.extended[e + 1]
        width = right - left
        return e, (right - s) / width, (s - left) / width, -1.0 / width, 1.0 / width

    def delta_load(self, s) -> np.ndarray:
        """Unit-mass hat load on the interior nodes for a source at scalar ``s``."""
        e, wl, wr, _, _ = self.hat(np.atleast_1d(s))
        ext = np.zeros(self.n + 2)
        ext[e[0]] += wl[0]
        ext[e[0] + 1] += wr[0]
        return ext[1:-1] / self.dx

    def solve_with_delta(self, s) -> np.ndarray:
        """Independent banded solve for a single source (does not use the cached inverse)."""
        return linalg.solve_banded((1, 1), self._banded, self.delta_load(s))

    def interpolate(self, u, x) -> np.ndarray:
        e, wl, wr, _, _ = self.hat(np.atleast_1d(x))
        ext = np.concatenate([[0.0], u, [0.0]])
        return wl * ext[e] + wr * ext[e + 1]

    def solutions(self, s, derivative=False):
        """Rows ``u_s`` on interior nodes for every source in ``s`` (and their ``s``-derivatives)."""
        e, wl, wr, dwl, dwr = self.hat(s)
        g = self.green[:, 1:-1]
        u = (wl[:, None] * g[e] + wr[:, None] * g[e + 1]) / self.dx
        if not derivative:
            return u
        du = (dwl[:, None] * g[e] + dwr[:, None] * g[e + 1]) / self.dx
        return u, du

    def cell_sum(self, nodal):
        return nodal.reshape(nodal.shape[0], self.d, self.refine).sum(axis=2)


class Schrodinger1D(ForwardModel):
    """Point-source / point-detector design on ``[0, 1]^2`` for the potential ``sigma``."""

    has_hess_sigma = False

    def __init__(self, d: int = 100, truth=None, profile_name: str = "gaussA", refine: int = 1,
                 noise_scale: float = 0.1, cache_size: int = 4):
        self.dim_param = d
        self.refine = refine
        self.truth = profile(profile_name, d) if truth is None else np.asarray(truth, dtype=float)
        if self.truth.shape != (d,):
            raise ValueError(f"truth must have length {d}")
        self.lower = np.zeros(2)
        self.upper = np.ones(2)
        self.noise_scale = noise_scale
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        self.grid(self.truth)

    def grid(self, sigma) -> GridOperator:
        sigma = np.asarray(sigma, dtype=float)
        key = sigma.tobytes()
        op = self._cache.get(key)
        if op is None:
            op = GridOperator(sigma, self.refine)
            self._cache[key] = op
        self._cache.move_to_end(key)
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return op

    def _pair(self, coords, sigma, derivative=False):
        op = self.grid(sigma)
        c = np.asarray(coords, dtype=float)
        src = op.solutions(c[:, 0], derivative)
        det = op.solutions(c[:, 1], derivative)
        return op, src, det

    def evaluate(self, coords, channels, sigma):
        op = self.grid(sigma)
        u = op.solutions(np.asarray(coords, dtype=float)[:, 0])
        return self._observe(op, u, np.asarray(coords, dtype=float)[:, 1])

    def _observe(self, op, u, x, derivative=False):
        e, wl, wr, dwl, dwr = op.hat(x)
        ext = np.pad(u, ((0, 0), (1, 1)))
        rows = np.arange(len(x))
        if derivative:
            wl, wr = dwl, dwr
        return wl * ext[rows, e] + wr * ext[rows, e + 1]

    def grad_sigma(self, coords, channels, sigma):
        op, u, v = self._pair(coords, sigma)
        return -op.dx * op.cell_sum(u * v)

    def grad_theta(self, coords, channels, sigma):
        op = self.grid(sigma)
        c = np.asarray(coords, dtype=float)
        u, du = op.solutions(c[:, 0], derivative=True)
        return np.column_stack([self._observe(op, du, c[:, 1]), self._observe(op, u, c[:, 1], derivative=True)])

    def grad_theta_grad_sigma(self, coords, channels, sigma):
        op, (u, du), (v, dv) = self._pair(coords, sigma, derivative=True)
        return np.stack([-op.dx * op.cell_sum(du * v), -op.dx * op.cell_sum(u * dv)], axis=-1)


def frechet_grad_sigma(model: Schrodinger1D, theta, sigma) -> np.ndarray:
    """Cell integrals of ``-u_{theta1} v_{theta2}`` for one design point."""
    return model.grad_sigma(np.atleast_2d(np.asarray(theta, dtype=float)), np.zeros(1, dtype=int), sigma)[0]


def solve_with_delta(grid: GridOperator, s: float) -> np.ndarray:
    return grid.solve_with_delta(s)
