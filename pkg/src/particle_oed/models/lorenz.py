"""Lorenz 63 observed along its trajectory.

The design variable is ``theta = (c, t)``: channel ``c`` picks ``x``, ``y`` or
``z`` and ``t`` is the observation time in ``[0, window_end]``.  Parameters are
ordered ``sigma = (alpha, gamma, beta)``::

    x' = alpha (y - x)
    y' = x (gamma - z) - y
    z' = x y - beta z

The state, the Jacobian ``J = d(x, y, z)/d sigma`` and (on request) the second
derivatives are integrated jointly by forward Euler.  Because Euler sensitivities
are the exact derivatives of the Euler trajectory, every derivative query is
consistent with finite differences of :meth:`Lorenz63.evaluate`.

Off-grid times use the clamped cubic spline through the grid values, with end
slopes taken from the ODE right-hand side.  The spline is linear in its data
and the sensitivity rates are the ``sigma``-derivatives of the state rates, so
the spline of ``J`` is exactly the ``sigma``-derivative of the spline of the
state, and its ``t``-derivative is the exact mixed derivative.  The spline is
twice continuously differentiable in ``t``, which keeps second-order
expansions in the design variable smooth across grid nodes.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numba
import numpy as np

from ..core import ForwardModel
from ..errors import NonFiniteState

SIGMA_TRUE = (10.0, 28.0, 8.0 / 3.0)
X0 = (1.5, -1.5, 25.0)


@numba.njit(cache=True)
def _integrate(x0, sig, h, nsteps, second):
    alpha, gamma, beta = sig[0], sig[1], sig[2]
    s = np.empty((nsteps + 1, 3))
    sd = np.empty((nsteps + 1, 3))
    jac = np.zeros((nsteps + 1, 3, 3))
    jd = np.empty((nsteps + 1, 3, 3))
    m = nsteps + 1 if second else 1
    hes = np.zeros((m, 3, 3, 3))
    hd = np.zeros((m, 3, 3, 3))
    s[0, 0], s[0, 1], s[0, 2] = x0[0], x0[1], x0[2]
    a = np.empty((3, 3))
    fss = np.zeros((3, 3, 3))
    fss[1, 0, 2] = -1.0
    fss[1, 2, 0] = -1.0
    fss[2, 0, 1] = 1.0
    fss[2, 1, 0] = 1.0
    fsp = np.zeros((3, 3, 3))  # d A[i, j] / d sigma_a
    fsp[0, 0, 0] = -1.0
    fsp[0, 1, 0] = 1.0
    fsp[1, 0, 1] = 1.0
    fsp[2, 2, 2] = -1.0
    bad = -1
    for n in range(nsteps + 1):
        x, y, z = s[n, 0], s[n, 1], s[n, 2]
        sd[n, 0] = alpha * (y - x)
        sd[n, 1] = x * (gamma - z) - y
        sd[n, 2] = x * y - beta * z
        a[0, 0], a[0, 1], a[0, 2] = -alpha, alpha, 0.0
        a[1, 0], a[1, 1], a[1, 2] = gamma - z, -1.0, -x
        a[2, 0], a[2, 1], a[2, 2] = y, x, -beta
        for i in range(3):
            for p in range(3):
                acc = 0.0
                for j in range(3):
                    acc += a[i, j] * jac[n, j, p]
                jd[n, i, p] = acc
        jd[n, 0, 0] += y - x
        jd[n, 1, 1] += x
        jd[n, 2, 2] -= z
        if second:
            for i in range(3):
                for p in range(3):
                    for q in range(3):
                        acc = 0.0
                        for j in range(3):
                            acc += a[i, j] * hes[n, j, p, q]
                            acc += fsp[i, j, q] * jac[n, j, p] + fsp[i, j, p] * jac[n, j, q]
                            for l in range(3):
                                acc += fss[i, j, l] * jac[n, j, p] * jac[n, l, q]
                        hd[n, i, p, q] = acc
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            bad = n
            break
        if n == nsteps:
            break
        for i in range(3):
            s[n + 1, i] = s[n, i] + h * sd[n, i]
            for p in range(3):
                jac[n + 1, i, p] = jac[n, i, p] + h * jd[n, i, p]
                if second:
                    for q in range(3):
                        hes[n + 1, i, p, q] = hes[n, i, p, q] + h * hd[n, i, p, q]
    return s, sd, jac, jd, hes, hd, bad


@dataclass(frozen=True)
class LorenzState:
    """Grid values and ODE right-hand sides of the trajectory and its sensitivities."""

    h: float
    trajectory: np.ndarray
    rates: np.ndarray
    sensitivities: np.ndarray
    sensitivity_rates: np.ndarray
    second: np.ndarray | None = None
    second_rates: np.ndarray | None = None

    @property
    def times(self):
        return self.h * np.arange(self.trajectory.shape[0])


def lorenz_simulate(sigma, h: float = 1e-4, t_end: float = 3.0, x0=X0, second: bool = False) -> LorenzState:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (3,) or not np.all(np.isfinite(sigma)):
        raise ValueError(f"sigma must be three finite numbers, got {sigma!r}")
    nsteps = int(round(t_end / h))
    s, sd, jac, jd, hes, hd, bad = _integrate(np.asarray(x0, dtype=float), sigma, float(h), nsteps, bool(second))
    if bad >= 0 or not (np.all(np.isfinite(jac[-1])) and np.all(np.isfinite(hes[-1]))):
        t_bad = bad * h if bad >= 0 else t_end
        raise NonFiniteState(f"Lorenz integration blew up at t={t_bad:g} for sigma={sigma}")
    if second:
        return LorenzState(h, s, sd, jac, jd, hes, hd)
    return LorenzState(h, s, sd, jac, jd)


@numba.njit(cache=True)
def _clamped_slopes(flat, h, left, right):
    # Thomas sweep for tridiag(1, 4, 1) k = 3 (y[i+1] - y[i-1]) / h, interior nodes only
    n = flat.shape[0] - 1
    cols = flat.shape[1]
    k = np.empty_like(flat)
    k[0] = left
    k[n] = right
    m = n - 1
    if m < 1:
        return k
    cp = np.empty(m)
    cp[0] = 0.25
    for i in range(1, m):
        cp[i] = 1.0 / (4.0 - cp[i - 1])
    for i in range(m):
        for c in range(cols):
            r = 3.0 * (flat[i + 2, c] - flat[i, c]) / h
            if i == 0:
                r -= left[c]
            else:
                r -= k[i, c]
            if i == m - 1:
                r -= right[c]
            k[i + 1, c] = r * cp[i]
    for i in range(m - 2, -1, -1):
        for c in range(cols):
            k[i + 1, c] -= cp[i] * k[i + 2, c]
    return k


def spline_slopes(values, h, left, right):
    """Node slopes of the clamped cubic spline on a uniform grid (leading axis = nodes)."""
    n = values.shape[0] - 1
    flat = np.ascontiguousarray(values.reshape(n + 1, -1))
    slopes = _clamped_slopes(flat, float(h), np.ascontiguousarray(left.reshape(-1), dtype=float),
                             np.ascontiguousarray(right.reshape(-1), dtype=float))
    return slopes.reshape(values.shape)


def _hermite(t, h, nsteps):
    u = np.asarray(t, dtype=float) / h
    n = np.clip(np.floor(u).astype(np.int64), 0, nsteps - 1)
    tau = u - n
    t2, t3 = tau * tau, tau * tau * tau
    basis = (2 * t3 - 3 * t2 + 1, (t3 - 2 * t2 + tau) * h, -2 * t3 + 3 * t2, (t3 - t2) * h)
    dbasis = ((6 * t2 - 6 * tau) / h, 3 * t2 - 4 * tau + 1, (-6 * t2 + 6 * tau) / h, 3 * t2 - 2 * tau)
    return n, basis, dbasis


def _combine(n, w, values, slopes):
    shape = (-1,) + (1,) * (values.ndim - 1)
    return (w[0].reshape(shape) * values[n] + w[1].reshape(shape) * slopes[n]
            + w[2].reshape(shape) * values[n + 1] + w[3].reshape(shape) * slopes[n + 1])


class Lorenz63(ForwardModel):
    """Lorenz 63 forward model over ``{x, y, z} x [0, window_end]``."""

    dim_param = 3
    n_channels = 3
    has_hess_sigma = True

    def __init__(self, truth=SIGMA_TRUE, window_end: float = 3.0, h: float = 1e-4, x0=X0,
                 noise_scale: float = 0.0, cache_size: int = 4):
        self.truth = np.asarray(truth, dtype=float)
        self.window_end = float(window_end)
        self.h = float(h)
        self.x0 = np.asarray(x0, dtype=float)
        self.noise_scale = noise_scale
        self.lower = np.array([0.0])
        self.upper = np.array([self.window_end])
        self.nsteps = int(round(self.window_end / self.h))
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def state(self, sigma, second: bool = False) -> LorenzState:
        return self._entry(sigma, second)[0]

    def _entry(self, sigma, second=False):
        sigma = np.asarray(sigma, dtype=float)
        key = sigma.tobytes()
        entry = self._cache.get(key)
        if entry is None or (second and entry[0].second is None):
            st = lorenz_simulate(sigma, self.h, self.window_end, self.x0, second)
            splines = {"state": (st.trajectory, spline_slopes(st.trajectory, self.h, st.rates[0], st.rates[-1])),
                       "jac": (st.sensitivities, spline_slopes(st.sensitivities, self.h, st.sensitivity_rates[0],
                                                               st.sensitivity_rates[-1]))}
            if second:
                splines["hess"] = (st.second, spline_slopes(st.second, self.h, st.second_rates[0],
                                                            st.second_rates[-1]))
            entry = (st, splines)
            self._cache[key] = entry
        self._cache.move_to_end(key)
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return entry

    def _query(self, coords, channels, sigma, which, derivative=0):
        t = np.asarray(coords, dtype=float)[:, 0]
        values, slopes = self._entry(sigma, which == "hess")[1][which]
        n, w, dw = _hermite(t, self.h, self.nsteps)
        out = _combine(n, dw if derivative else w, values, slopes)
        return out[np.arange(len(t)), np.asarray(channels)]

    def evaluate(self, coords, channels, sigma):
        return self._query(coords, channels, sigma, "state")

    def grad_sigma(self, coords, channels, sigma):
        return self._query(coords, channels, sigma, "jac")

    def grad_theta(self, coords, channels, sigma):
        return self._query(coords, channels, sigma, "state", 1)[:, None]

    def grad_theta_grad_sigma(self, coords, channels, sigma):
        return self._query(coords, channels, sigma, "jac", 1)[:, :, None]

    def hess_sigma(self, coords, channels, sigma):
        return self._query(coords, channels, sigma, "hess")
