"""Domain types, the forward-model contract, and seeded ensemble sampling.

A design measure is always the empirical measure of ``N`` equally weighted
particles.  Each particle carries continuous coordinates, an integer channel
(the categorical part of the design space; ``0`` for models without one) and a
frozen additive noise realization that follows the particle index, not its
position.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

# Sub-stream identifiers. New consumers get new ids; existing ids never change.
STREAMS = {"sampling": 0, "noise": 1, "sigma": 2, "compare": 3}


def rng(seed: int, purpose: str, repeat: int = 0) -> np.random.Generator:
    """Independent generator for one ``purpose`` of one repeat of a seeded run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(repeat), STREAMS[purpose]))
    return np.random.default_rng(ss)


def pairwise_sum(a: np.ndarray, block: int = 64) -> np.ndarray:
    """Sum over axis 0 with a fixed recursive halving order.

    Even-length inputs are always split at ``n // 2``, so the sum of an array
    concatenated with itself is exactly twice the sum of the original; this
    keeps duplicated ensembles bit-identical to the originals.
    """
    n = a.shape[0]
    if n <= 1 or (n <= block and n % 2):
        return a.sum(axis=0)
    half = n // 2
    return pairwise_sum(a[:half], block) + pairwise_sum(a[half:], block)


def pairwise_gram(g: np.ndarray, block: int = 256) -> np.ndarray:
    """``g.T @ g`` accumulated over row blocks in the same order as :func:`pairwise_sum`."""
    n = g.shape[0]
    if n <= 1 or (n <= block and n % 2):
        return g.T @ g
    half = n // 2
    return pairwise_gram(g[:half], block) + pairwise_gram(g[half:], block)


@dataclass(frozen=True)
class DesignPoint:
    coords: np.ndarray
    channel: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", np.atleast_1d(np.asarray(self.coords, dtype=float)))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Ensemble:
    """``N`` particles representing ``rho = (1/N) sum_i delta_{theta_i}``."""

    coords: np.ndarray
    channels: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        object.__setattr__(self, "coords", _frozen(coords, float))
        object.__setattr__(self, "channels", _frozen(self.channels, np.int64))
        object.__setattr__(self, "noise", _frozen(self.noise, float))
        n = self.coords.shape[0]
        if n < 1:
            raise ValueError("an ensemble needs at least one particle")
        if self.channels.shape != (n,) or self.noise.shape != (n,):
            raise ValueError("coords, channels and noise must have the same length")

    @classmethod
    def from_points(cls, points: Sequence[DesignPoint], noise=None) -> "Ensemble":
        coords = np.stack([p.coords for p in points])
        channels = [0 if p.channel is None else p.channel for p in points]
        if noise is None:
            noise = np.zeros(len(points))
        return cls(coords, channels, noise)

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.size

    def point(self, i: int) -> DesignPoint:
        return DesignPoint(self.coords[i].copy(), int(self.channels[i]))

    def with_coords(self, coords: np.ndarray) -> "Ensemble":
        return Ensemble(coords, self.channels, self.noise)

    def concat(self, other: "Ensemble") -> "Ensemble":
        return Ensemble(
            np.concatenate([self.coords, other.coords]),
            np.concatenate([self.channels, other.channels]),
            np.concatenate([self.noise, other.noise]),
        )

    def channel_counts(self, n_channels: int) -> np.ndarray:
        return np.bincount(self.channels, minlength=n_channels)


class ForwardModel(abc.ABC):
    """Parameter-to-output map ``M(theta; sigma)`` and its derivatives.

    All queries are batched over particles: ``coords`` has shape ``(N, k)``
    and ``channels`` shape ``(N,)``.  Shapes of the results:

    ``evaluate`` (N,), ``grad_sigma`` (N, d), ``grad_theta`` (N, k),
    ``grad_theta_grad_sigma`` (N, d, k), ``hess_sigma`` (N, d, d).
    """

    dim_param: int
    lower: np.ndarray
    upper: np.ndarray
    n_channels: int = 1
    truth: np.ndarray
    noise_scale: float = 0.0
    has_hess_sigma: bool = False

    @property
    def dim_theta(self) -> int:
        return len(self.lower)

    @property
    def default_hessian_mode(self) -> str:
        return "full" if self.has_hess_sigma else "gauss-newton"

    @abc.abstractmethod
    def evaluate(self, coords, channels, sigma) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_sigma(self, coords, channels, sigma) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_theta(self, coords, channels, sigma) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_theta_grad_sigma(self, coords, channels, sigma) -> np.ndarray: ...

    def hess_sigma(self, coords, channels, sigma) -> np.ndarray:
        from .errors import HessUnavailable

        raise HessUnavailable(f"{type(self).__name__} does not provide Hess_sigma M")

    def project(self, coords: np.ndarray) -> np.ndarray:
        """Clamp continuous coordinates to the declared box."""
        return np.clip(coords, self.lower, self.upper)


# ---------------------------------------------------------------------------
# data(theta) = M(theta; sigma_true) + frozen noise


def data_at(model: ForwardModel, point_index: int, ensemble: Ensemble, point: DesignPoint) -> float:
    channel = 0 if point.channel is None else point.channel
    value = model.evaluate(point.coords[None, :], np.array([channel]), model.truth)[0]
    return float(value + ensemble.noise[point_index])


def grad_theta_data(model: ForwardModel, point_index: int, ensemble: Ensemble, point: DesignPoint) -> np.ndarray:
    # noise is constant along the flow, so only the noiseless part has a theta-gradient
    channel = 0 if point.channel is None else point.channel
    return model.grad_theta(point.coords[None, :], np.array([channel]), model.truth)[0]


def observed_data(model: ForwardModel, ensemble: Ensemble) -> np.ndarray:
    return model.evaluate(ensemble.coords, ensemble.channels, model.truth) + ensemble.noise


def observed_data_grad(model: ForwardModel, ensemble: Ensemble) -> np.ndarray:
    return model.grad_theta(ensemble.coords, ensemble.channels, model.truth)


# ---------------------------------------------------------------------------
# initial design measures


@dataclass(frozen=True)
class UniformBox:
    """Uniform over the box; channels split into contiguous, balanced blocks."""


@dataclass(frozen=True)
class PerChannelUniform:
    counts: tuple[int, ...]


@dataclass(frozen=True)
class Bins:
    """``samples_per_bin`` uniform draws from each ``(channel, lo, hi)`` interval.

    Only the first continuous coordinate is binned; any others are drawn
    uniformly over the box.
    """

    bins: tuple[tuple[int, float, float], ...]
    samples_per_bin: int


@dataclass(frozen=True)
class DiagonalStripe:
    """``theta1 ~ U(lower, upper)``, ``theta1 - theta2 ~ spread * N(0, 1)`` on a 2-D box."""

    spread: float


DistributionSpec = UniformBox | PerChannelUniform | Bins | DiagonalStripe


def _balanced_channels(n: int, n_channels: int) -> np.ndarray:
    return (np.arange(n) * n_channels) // n


def sample_ensemble(spec: DistributionSpec, n: int | None, seed: int, model: ForwardModel,
                    repeat: int = 0, noise_scale: float | None = None) -> Ensemble:
    """Draw an :class:`Ensemble` from ``spec`` deterministically from ``seed``.

    ``n`` may be ``None`` for :class:`Bins` and :class:`PerChannelUniform`,
    whose size is implied by the distribution.
    """
    gen = rng(seed, "sampling", repeat)
    lo, hi = model.lower, model.upper
    k = model.dim_theta

    if isinstance(spec, UniformBox):
        if n is None or n < 1:
            raise ConfigError("uniform sampling needs N >= 1")
        coords = gen.uniform(lo, hi, size=(n, k))
        channels = _balanced_channels(n, model.n_channels)
    elif isinstance(spec, PerChannelUniform):
        counts = np.asarray(spec.counts, dtype=int)
        if len(counts) != model.n_channels or np.any(counts < 0) or counts.sum() < 1:
            raise ConfigError(f"per-channel counts {tuple(counts)} do not fit {model.n_channels} channels")
        if n is not None and n != counts.sum():
            raise ConfigError(f"N={n} disagrees with per-channel counts summing to {counts.sum()}")
        channels = np.repeat(np.arange(model.n_channels), counts)
        coords = gen.uniform(lo, hi, size=(len(channels), k))
    elif isinstance(spec, Bins):
        total = len(spec.bins) * spec.samples_per_bin
        if total < 1:
            raise ConfigError("bins spec yields zero samples")
        if n is not None and n != total:
            raise ConfigError(f"N={n} disagrees with bins spec total {total}")
        channels = np.repeat([b[0] for b in spec.bins], spec.samples_per_bin)
        if np.any(channels < 0) or np.any(channels >= model.n_channels):
            raise ConfigError("bin channel outside the model's channel range")
        b_lo = np.repeat([b[1] for b in spec.bins], spec.samples_per_bin)
        b_hi = np.repeat([b[2] for b in spec.bins], spec.samples_per_bin)
        coords = gen.uniform(lo, hi, size=(total, k))
        coords[:, 0] = gen.uniform(b_lo, b_hi)
        coords = model.project(coords)
    elif isinstance(spec, DiagonalStripe):
        if k != 2:
            raise ConfigError("a diagonal stripe needs a 2-D continuous domain")
        if n is None or n < 1:
            raise ConfigError("stripe sampling needs N >= 1")
        first = gen.uniform(lo[0], hi[0], size=n)
        second = first - spec.spread * gen.standard_normal(n)
        coords = model.project(np.column_stack([first, second]))
        channels = _balanced_channels(n, model.n_channels)
    else:
        raise ConfigError(f"unknown distribution spec {spec!r}")

    scale = model.noise_scale if noise_scale is None else noise_scale
    noise = scale * rng(seed, "noise", repeat).standard_normal(len(channels))
    return Ensemble(coords, channels, noise)


def require_finite(sigma: np.ndarray, what: str = "parameter", iteration=None) -> np.ndarray:
    from .errors import NonFiniteParameter

    if not np.all(np.isfinite(sigma)):
        raise NonFiniteParameter(f"non-finite {what}: {sigma!r}").with_iteration(iteration)
    return sigma
