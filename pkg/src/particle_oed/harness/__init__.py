"""Experiment configuration, orchestration and CSV output."""

from .config import RunSpec
from .histogram import HistogramReport, histogram, overlap
from .runner import compare_sampling, run_experiment

__all__ = ["RunSpec", "HistogramReport", "histogram", "overlap", "compare_sampling", "run_experiment"]
