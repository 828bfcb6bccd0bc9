"""Per-channel particle histograms and density-threshold bin selection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..core import Ensemble


@dataclass(frozen=True)
class HistogramReport:
    """Counts of shape ``(n_channels, bins, ..., bins)`` over a uniform grid on the box.

    A bin is selected when its share of its channel's particles is strictly
    greater than ``threshold``.
    """

    edges: tuple[np.ndarray, ...]
    counts: np.ndarray
    threshold: float

    @property
    def totals(self) -> np.ndarray:
        return self.counts.reshape(self.counts.shape[0], -1).sum(axis=1)

    @property
    def fractions(self) -> np.ndarray:
        totals = self.totals.astype(float)
        shape = (-1,) + (1,) * (self.counts.ndim - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = self.counts / totals.reshape(shape)
        return np.nan_to_num(frac)

    @property
    def selected(self) -> np.ndarray:
        return self.fractions > self.threshold

    def selected_bins(self) -> list[tuple]:
        """``(channel, bin index, ...)`` for every selected bin."""
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.selected)]

    def rows(self):
        frac, sel = self.fractions, self.selected
        for idx in itertools.product(*(range(n) for n in self.counts.shape)):
            ch, cell = idx[0], idx[1:]
            bounds = []
            for axis, b in enumerate(cell):
                bounds += [self.edges[axis][b], self.edges[axis][b + 1]]
            yield (ch, *bounds, int(self.counts[idx]), float(frac[idx]), int(sel[idx]))

    def header(self):
        cols = ["channel"]
        for axis in range(len(self.edges)):
            cols += [f"lo{axis}", f"hi{axis}"]
        return cols + ["count", "fraction", "selected"]


def histogram(ensemble: Ensemble, bins: int, threshold: float, lower, upper, n_channels: int = 1) -> HistogramReport:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    k = ensemble.coords.shape[1]
    edges = tuple(np.linspace(lower[a], upper[a], bins + 1) for a in range(k))
    n_channels = max(n_channels, int(ensemble.channels.max()) + 1)
    counts = np.zeros((n_channels,) + (bins,) * k, dtype=np.int64)
    for ch in range(n_channels):
        pts = ensemble.coords[ensemble.channels == ch]
        counts[ch] = np.histogramdd(pts, bins=edges)[0].astype(np.int64)
    return HistogramReport(edges, counts, threshold)


def overlap(report: HistogramReport, reference: HistogramReport) -> tuple[int, int]:
    """``(selected bins shared with reference, selected bins in reference)``."""
    mine = set(report.selected_bins())
    ref = set(reference.selected_bins())
    return len(mine & ref), len(ref)
