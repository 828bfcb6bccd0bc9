"""Run orchestration and CSV emission.

Files written to ``output.dir`` by :func:`run_experiment`::

    resolved.cfg                    every key with its resolved value
    metrics_rNNN.csv                iter,criterion,sigma_error,loss,grad_norm,wall_ms (iter 0 = initial state)
    metrics.csv                     iter, then <column>_mean,<column>_std for the five metrics
    ensemble_initial_rNNN.csv       channel,theta0[,theta1...]
    ensemble_rNNN.csv               same columns, final particles
    sigma_rNNN.csv                  index,initial,final,truth
    histogram_initial_rNNN.csv      channel,lo0,hi0[,lo1,hi1],count,fraction,selected
    histogram_rNNN.csv              same columns, final particles

``wall_ms`` is left empty unless ``output.timing`` is true, which keeps the
files byte-identical across re-runs.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..core import Ensemble, sample_ensemble
from ..flow import FlowResult, measure, run, run_benchmark
from ..errors import ConfigError
from ..inversion import inner_gd, loss
from .config import RunSpec
from .histogram import HistogramReport, histogram

METRIC_COLUMNS = ("iter", "criterion", "sigma_error", "loss", "grad_norm", "wall_ms")
COMPARE_COLUMNS = ("iter", "strategic_sigma_error", "strategic_loss", "uniform_sigma_error", "uniform_loss")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_ensemble(path: Path, ensemble: Ensemble) -> None:
    k = ensemble.coords.shape[1]
    header = ["channel"] + [f"theta{a}" for a in range(k)]
    rows = ([int(c), *map(float, x)] for c, x in zip(ensemble.channels, ensemble.coords))
    write_csv(path, header, rows)


def read_ensemble(path) -> Ensemble:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
    except (OSError, StopIteration) as exc:
        raise ConfigError(f"cannot read ensemble {path}: {exc}") from None
    if not header or header[0] != "channel" or len(header) < 2:
        raise ConfigError(f"{path} is not an ensemble dump (expected channel,theta0,...)")
    if not rows:
        raise ConfigError(f"{path} holds no particles")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return Ensemble(data[:, 1:], data[:, 0].astype(int), np.zeros(len(data)))


def write_histogram(path: Path, report: HistogramReport) -> None:
    write_csv(path, report.header(), report.rows())


def metric_rows(records, timing: bool):
    for r in records:
        yield (r.iter, r.criterion, r.sigma_error, r.loss, r.grad_norm, r.wall_ms if timing else None)


def aggregate(traces: list[np.ndarray]) -> np.ndarray:
    """Mean and population std over repeats at each iteration; ``traces`` are (T+1, 5) arrays."""
    stack = np.stack(traces)
    return np.concatenate([stack.mean(axis=0)[..., None], stack.std(axis=0)[..., None]], axis=-1)


def _histogram(spec: RunSpec, ensemble, model) -> HistogramReport:
    return histogram(ensemble, spec.int("output.bins"), spec.float("output.threshold"),
                     model.lower, model.upper, model.n_channels)


def sample(spec: RunSpec, model, repeat: int) -> Ensemble:
    dist = spec.distribution()
    n = spec.int("init.N") if spec.get("init.rho") in ("uniform", "stripe") else None
    return sample_ensemble(dist, n, spec.int("run.seed"), model, repeat)


def run_experiment(spec: RunSpec, benchmark: bool = False) -> Path:
    """Run every repeat of ``spec`` and write all output files; returns the output directory."""
    model = spec.build_model()
    config = spec.flow_config()
    timing = spec.timing()
    out = spec.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(spec.to_text(), encoding="utf-8")

    traces = []
    for r in range(spec.int("run.repeats")):
        ensemble = sample(spec, model, r)
        if benchmark:
            sigma0 = np.array(model.truth, dtype=float)
        else:
            sigma0 = spec.presolve(spec.initial_sigma(model, r), ensemble, model)
        first = measure(config.kind, ensemble, sigma0, model, 0, 0.0, config.ridge, config.cond_cap)
        if benchmark:
            result: FlowResult = run_benchmark(config, ensemble, model)
        else:
            result = run(config, ensemble, sigma0, model)
        records = [first] + result.records

        tag = f"r{r:03d}"
        write_csv(out / f"metrics_{tag}.csv", METRIC_COLUMNS, metric_rows(records, timing))
        write_ensemble(out / f"ensemble_initial_{tag}.csv", ensemble)
        write_ensemble(out / f"ensemble_{tag}.csv", result.ensemble)
        write_csv(out / f"sigma_{tag}.csv", ("index", "initial", "final", "truth"),
                  zip(range(model.dim_param), sigma0, result.sigma, model.truth))
        write_histogram(out / f"histogram_initial_{tag}.csv", _histogram(spec, ensemble, model))
        write_histogram(out / f"histogram_{tag}.csv", _histogram(spec, result.ensemble, model))
        traces.append(np.array([[rec.criterion, rec.sigma_error, rec.loss, rec.grad_norm, rec.wall_ms]
                                for rec in records]))

    stats = aggregate(traces)
    header = ["iter"]
    for name in METRIC_COLUMNS[1:]:
        header += [f"{name}_mean", f"{name}_std"]
    rows = []
    for it, row in enumerate(stats):
        cells = [it]
        for j, (mean, std) in enumerate(row):
            if j == 4 and not timing:
                cells += [None, None]
            else:
                cells += [mean, std]
        rows.append(cells)
    write_csv(out / "metrics.csv", header, rows)
    return out


def reconstruction_trace(sigma0, ensemble, model, iterations: int, step: float):
    """``(sigma_error, loss)`` after each of ``iterations`` gradient steps, starting with iteration 0."""
    sigma = np.array(sigma0, dtype=float)
    trace = [(float(np.linalg.norm(sigma - model.truth)), loss(sigma, ensemble, model))]
    for _ in range(iterations):
        sigma = inner_gd(sigma, ensemble, model, 1, step)
        trace.append((float(np.linalg.norm(sigma - model.truth)), loss(sigma, ensemble, model)))
    return trace


def compare_sampling(spec_strategic: RunSpec, spec_uniform: RunSpec, out: Path | None = None) -> Path:
    """Inner reconstruction from one shared ``sigma0`` under two ensembles of equal size."""
    if spec_strategic.model_section() != spec_uniform.model_section():
        raise ConfigError("compare: both specs must describe the same model")
    if spec_strategic.sigma_rule() != spec_uniform.sigma_rule():
        raise ConfigError("compare: both specs must use the same sigma0 rule")
    n_a, n_b = spec_strategic.ensemble_size(), spec_uniform.ensemble_size()
    if n_a != n_b:
        raise ConfigError(f"compare: particle budgets differ ({n_a} vs {n_b})")

    model = spec_strategic.build_model()
    iterations = spec_strategic.int("compare.T")
    step_text = spec_strategic.get("compare.dt") or spec_strategic.get("flow.inner_dt")
    try:
        step = float(step_text)
    except ValueError:
        raise ConfigError(f"compare.dt must be a number, got {step_text!r}") from None
    if iterations < 0 or step <= 0:
        raise ConfigError("compare needs compare.T >= 0 and a positive step")

    sigma0 = spec_strategic.initial_sigma(model, 0)
    strategic = reconstruction_trace(sigma0, sample(spec_strategic, model, 0), model, iterations, step)
    uniform = reconstruction_trace(sigma0, sample(spec_uniform, model, 0), model, iterations, step)

    out = Path(out) if out is not None else spec_strategic.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / "compare.csv"
    write_csv(path, COMPARE_COLUMNS, ((i, *a, *b) for i, (a, b) in enumerate(zip(strategic, uniform))))
    return path
