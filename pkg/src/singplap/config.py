"""Experiment configuration read from TOML."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .problem import ValidatedProblem, problem_from_mapping
from .solver1d import SolverOptions

__all__ = ["read_toml", "MeshConfig", "AnalysisConfig", "OutputConfig", "ExperimentConfig",
           "parse_config", "load_config", "SWEEP_KEYS", "CHECKS"]

SWEEP_KEYS = ("gamma", "p", "theta", "mesh_level")
CHECKS = ("rate", "limit", "log", "gradient", "sobolev", "blowup", "sandwich", "symmetry",
          "wcp", "lambda")
_TOP = ("problem", "reaction", "domain", "mesh", "solver", "analysis", "output", "sweep")


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _take(section: dict, cls, name):
    allowed = {f.name for f in fields(cls)}
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{name}]", f"{name}.{key}")
    return cls(**section)


@dataclass(frozen=True)
class MeshConfig:
    n_cells: int = 4096
    ratio: float = 1.15
    h_min_rel: float = 1e-8
    level: int = 0
    n_radial: int = 128
    n_theta: int = 64
    nx: int = 64
    ny: int = 64


@dataclass(frozen=True)
class AnalysisConfig:
    checks: tuple = ("rate", "limit")
    window: tuple = (1e-5, 1e-2)
    log_window: tuple = (1e-6, 1e-2)
    betas: tuple = (0.25, 0.5, 1.0)
    deltas: tuple = (1e-2, 1e-3, 1e-4)
    shells: tuple = (1e-2, 1e-6, 9)
    L: float = 1.0
    samples: int = 100_000
    s: float = 1.0
    rate_tol: float = 0.02
    limit_tol: float = 0.02
    blowup_tol: float = 0.03
    r2_min: float = 0.999

    def __post_init__(self):
        for name in ("checks", "window", "log_window", "betas", "deltas", "shells"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for c in self.checks:
            if c not in CHECKS:
                raise ConfigError(f"unknown check {c!r}", "analysis.checks")
        for name in ("window", "log_window"):
            lo, hi = getattr(self, name)
            if not 0 < lo < hi:
                raise ConfigError("window needs 0 < lo < hi", f"analysis.{name}")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    formats: tuple = ("json", "csv")

    def __post_init__(self):
        object.__setattr__(self, "formats", tuple(self.formats))
        for f in self.formats:
            if f not in ("json", "csv", "svg"):
                raise ConfigError(f"unknown format {f!r}", "output.formats")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ValidatedProblem
    mesh: MeshConfig = MeshConfig()
    solver: SolverOptions = SolverOptions()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def content_hash(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_config(raw: dict) -> ExperimentConfig:
    for key in raw:
        if key not in _TOP:
            raise ConfigError(f"unknown section [{key}]", key)
    problem = problem_from_mapping(raw)
    try:
        mesh = _take(dict(raw.get("mesh", {})), MeshConfig, "mesh")
        solver = _take(dict(raw.get("solver", {})), SolverOptions, "solver")
        analysis = _take(dict(raw.get("analysis", {})), AnalysisConfig, "analysis")
        output = _take(dict(raw.get("output", {})), OutputConfig, "output")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    sweep = dict(raw.get("sweep", {}))
    for key, vals in sweep.items():
        if key not in SWEEP_KEYS:
            raise ConfigError(f"unknown sweep parameter {key!r}", f"sweep.{key}")
        if not isinstance(vals, list):
            raise ConfigError("sweep values must be a list", f"sweep.{key}")
    return ExperimentConfig(problem, mesh, solver, analysis, output, sweep, raw)


def load_config(path) -> ExperimentConfig:
    return parse_config(read_toml(path))
