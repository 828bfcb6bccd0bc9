"""Run specifications as flat ``key = value`` text with dotted sections.

Sections are ``model.*``, ``flow.*``, ``init.*``, ``run.*``, ``output.*`` and
``compare.*``.  Blank lines and ``#`` comments are ignored.  Unknown keys are
an error, so typos fail loudly.  :meth:`RunSpec.to_text` writes every key with
its resolved value; parsing that text back gives an equal spec.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import Bins, DiagonalStripe, PerChannelUniform, UniformBox, rng
from ..errors import ConfigError
from ..flow import ALGORITHMS, FlowConfig
from ..inversion import MODES, inner_gd
from ..models.linear import LinearModel
from ..models.lorenz import SIGMA_TRUE, Lorenz63
from ..models.schrodinger import PROFILES, Schrodinger1D, profile

OUTPUT_ROOT_ENV = "PARTICLE_OED_OUTPUT_ROOT"

MODEL_DEFAULTS = {
    "linear": {"degree": "2", "truth": "", "lower": "-1", "upper": "1", "noise": "0"},
    "lorenz63": {"truth": ",".join(repr(v) for v in SIGMA_TRUE), "window_end": "3", "h": "0.0001", "noise": "0"},
    "schrodinger": {"d": "100", "profile": "gaussA", "profile_terms": "", "profile_offset": "0.05",
                    "refine": "1", "noise": "0.1"},
}

DEFAULTS = {
    "flow.criterion": "D",
    "flow.algorithm": "streamlined",
    "flow.T": "100",
    "flow.dt": "0.001",
    "flow.inner_T": "0",
    "flow.inner_dt": "0",
    "flow.ridge": "0",
    "flow.hessian": "auto",
    "flow.cond_cap": "1e12",
    "init.rho": "uniform",
    "init.N": "100",
    "init.counts": "",
    "init.bins": "",
    "init.bins_from": "",
    "init.samples_per_bin": "1",
    "init.stripe_spread": "0.002",
    "init.sigma": "offset-gaussian",
    "init.sigma_scale": "0",
    "init.sigma_values": "",
    "init.presolve_T": "0",
    "init.presolve_dt": "0",
    "init.presolve_tol": "1e-6",
    "run.repeats": "1",
    "run.seed": "0",
    "output.dir": "out",
    "output.bins": "60",
    "output.threshold": "0.05",
    "output.timing": "false",
    "compare.T": "2000",
    "compare.dt": "",
}


def parse_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        raw[key] = value
    return raw


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunSpec:
    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunSpec":
        raw = parse_text(text)
        name = raw.get("model.name")
        if name not in MODEL_DEFAULTS:
            raise ConfigError(f"model.name must be one of {sorted(MODEL_DEFAULTS)}, got {name!r}")
        allowed = dict(DEFAULTS)
        allowed["model.name"] = name
        allowed.update({f"model.{k}": v for k, v in MODEL_DEFAULTS[name].items()})
        unknown = sorted(set(raw) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        allowed.update(raw)
        spec = cls(allowed)
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path) -> "RunSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read spec {path}: {exc}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        keys = ["model.name"] + sorted(k for k in self.values if k.startswith("model.") and k != "model.name")
        keys += [k for k in DEFAULTS]
        return "".join(f"{k} = {self.values[k]}\n" for k in keys)

    def get(self, key):
        return self.values[key]

    def int(self, key):
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def float(self, key):
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.values[key]!r}") from None

    def validate(self):
        self.flow_config()
        self.build_model()
        self.distribution()
        if self.int("run.repeats") < 1:
            raise ConfigError("run.repeats must be >= 1")
        if self.get("init.sigma") not in ("offset-gaussian", "offset-uniform", "explicit"):
            raise ConfigError(f"unknown init.sigma rule {self.get('init.sigma')!r}")
        if self.int("output.bins") < 1:
            raise ConfigError("output.bins must be >= 1")
        if not 0.0 <= self.float("output.threshold") < 1.0:
            raise ConfigError("output.threshold must lie in [0, 1)")
        _bool(self.get("output.timing"))

    # --- builders -------------------------------------------------------

    def build_model(self):
        name = self.get("model.name")
        noise = self.float("model.noise")
        try:
            if name == "linear":
                truth = _floats(self.get("model.truth"), "model.truth") or None
                return LinearModel(self.int("model.degree") + 1, truth, self.float("model.lower"),
                                   self.float("model.upper"), noise)
            if name == "lorenz63":
                return Lorenz63(_floats(self.get("model.truth"), "model.truth"), self.float("model.window_end"),
                                self.float("model.h"), noise_scale=noise)
            d = self.int("model.d")
            prof = self.get("model.profile")
            if prof == "custom":
                terms = [tuple(_floats(t, "model.profile_terms")) for t in self.get("model.profile_terms").split(";")
                         if t.strip()]
                if not terms or any(len(t) != 3 for t in terms):
                    raise ConfigError("model.profile_terms must be 'weight,centre,width;...'")
                truth = profile("custom", d, terms, self.float("model.profile_offset"))
            elif prof in PROFILES:
                truth = profile(prof, d)
            else:
                raise ConfigError(f"unknown model.profile {prof!r}")
            return Schrodinger1D(d, truth, refine=self.int("model.refine"), noise_scale=noise)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid model parameters: {exc}") from None

    def flow_config(self) -> FlowConfig:
        mode = self.get("flow.hessian")
        if mode not in MODES + ("auto",):
            raise ConfigError(f"flow.hessian must be auto or one of {MODES}")
        if self.get("flow.algorithm") not in ALGORITHMS:
            raise ConfigError(f"flow.algorithm must be one of {ALGORITHMS}")
        try:
            return FlowConfig(
                kind=self.get("flow.criterion"),
                algorithm=self.get("flow.algorithm"),
                T=self.int("flow.T"),
                dt=self.float("flow.dt"),
                inner_T=self.int("flow.inner_T"),
                inner_dt=self.float("flow.inner_dt"),
                ridge=self.float("flow.ridge"),
                hessian_mode=None if mode == "auto" else mode,
                cond_cap=self.float("flow.cond_cap"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def distribution(self):
        kind = self.get("init.rho")
        if kind == "uniform":
            return UniformBox()
        if kind == "per-channel":
            counts = [int(v) for v in _floats(self.get("init.counts"), "init.counts")]
            return PerChannelUniform(tuple(counts))
        if kind == "bins":
            per_bin = self.int("init.samples_per_bin")
            if self.get("init.bins_from"):
                bins = bins_from_histogram_csv(self.resolve_path(self.get("init.bins_from")))
            else:
                bins = []
                for item in self.get("init.bins").split(";"):
                    if not item.strip():
                        continue
                    parts = item.split(":")
                    if len(parts) != 3:
                        raise ConfigError(f"init.bins entry {item!r} is not 'channel:lo:hi'")
                    bins.append((int(parts[0]), float(parts[1]), float(parts[2])))
            if not bins or per_bin < 1:
                raise ConfigError("bins spec yields zero samples")
            return Bins(tuple(bins), per_bin)
        if kind == "stripe":
            return DiagonalStripe(self.float("init.stripe_spread"))
        raise ConfigError(f"unknown init.rho {kind!r}")

    def ensemble_size(self):
        dist = self.distribution()
        if isinstance(dist, Bins):
            return len(dist.bins) * dist.samples_per_bin
        if isinstance(dist, PerChannelUniform):
            return int(sum(dist.counts))
        return self.int("init.N")

    def initial_sigma(self, model, repeat: int = 0, seed: int | None = None) -> np.ndarray:
        seed = self.int("run.seed") if seed is None else seed
        rule = self.get("init.sigma")
        scale = self.float("init.sigma_scale")
        gen = rng(seed, "sigma", repeat)
        if rule == "offset-gaussian":
            return model.truth + scale * gen.standard_normal(model.dim_param)
        if rule == "offset-uniform":
            return model.truth + scale * gen.uniform(size=model.dim_param)
        values = np.array(_floats(self.get("init.sigma_values"), "init.sigma_values"))
        if values.shape != (model.dim_param,):
            raise ConfigError(f"init.sigma_values needs {model.dim_param} entries")
        return values

    def presolve(self, sigma, ensemble, model):
        iters = self.int("init.presolve_T")
        if iters == 0:
            return sigma
        return inner_gd(sigma, ensemble, model, iters, self.float("init.presolve_dt"), self.float("init.presolve_tol"))

    def resolve_path(self, path) -> Path:
        p = Path(path)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not p.is_absolute():
            p = Path(root) / p
        return p

    def output_dir(self) -> Path:
        return self.resolve_path(self.get("output.dir"))

    def timing(self) -> bool:
        return _bool(self.get("output.timing"))

    def sigma_rule(self):
        return tuple(self.values[k] for k in ("init.sigma", "init.sigma_scale", "init.sigma_values",
                                              "init.presolve_T", "init.presolve_dt", "init.presolve_tol"))

    def model_section(self):
        return {k: v for k, v in self.values.items() if k.startswith("model.")}


def bins_from_histogram_csv(path) -> list[tuple[int, float, float]]:
    """Selected bins of a 1-D histogram report, as ``(channel, lo, hi)`` triples."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read histogram {path}: {exc}") from None
    if rows and "lo1" in rows[0]:
        raise ConfigError("bins can only be taken from a 1-D histogram")
    return [(int(r["channel"]), float(r["lo0"]), float(r["hi0"])) for r in rows if r["selected"] == "1"]
