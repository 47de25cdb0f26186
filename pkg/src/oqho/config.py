"""Run configuration: TOML ingestion and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .quadrature import QuadratureConfig
from .system import OqhoModel, build_model, model_from_rates

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SECTIONS = {
    "model": {"mu", "nu", "R", "m", "M"},
    "run": {"T", "N", "theta", "theta_range"},
    "quadrature": {"nodes_per_panel", "panels_per_period", "min_panels", "max_nodes"},
    "tolerances": {"series_tol"},
    "verify": {"nystrom_n", "nystrom_functions"},
}
THETA_RANGE_KEYS = {"start", "stop", "count", "spacing"}


@dataclass(frozen=True)
class RunConfig:
    mu: float | None = 1.0
    nu: float | None = 1.0
    R: tuple | None = None
    M: tuple | None = None
    m: int | None = None
    T: float = 1.0
    N: int = 10
    thetas: tuple = ()
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    series_tol: float = 1e-12
    nystrom_n: int = 4000
    nystrom_functions: int = 5

    def __post_init__(self):
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"run.T: horizon must be positive, got {self.T!r}")
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"run.N: truncation must be an integer >= 1, got {self.N!r}")
        for th in self.thetas:
            if not (math.isfinite(th) and th > 0):
                raise ConfigError(f"run.theta: values must be positive and finite, got {th!r}")
        if not self.series_tol > 0:
            raise ConfigError("tolerances.series_tol must be positive")
        if self.nystrom_n < 2:
            raise ConfigError("verify.nystrom_n must be >= 2")

    def build_model(self) -> OqhoModel:
        if self.R is not None:
            R = np.array(self.R, dtype=float).reshape(2, 2)
            M = np.array(self.M, dtype=float).reshape(self.m, 2)
            return build_model(R, M)
        return model_from_rates(self.mu, self.nu)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def parse_theta_spec(text: str) -> tuple:
    """``"0.1,0.2"`` (list) or ``"start:stop:count[:log]"`` (range)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4):
                raise ValueError
            spacing = parts[3] if len(parts) == 4 else "linear"
            return theta_range(float(parts[0]), float(parts[1]), int(parts[2]), spacing)
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"--theta: cannot parse {text!r}; use a,b,c or start:stop:count[:log]") from None


def theta_range(start: float, stop: float, count: int, spacing: str = "linear") -> tuple:
    if count < 1:
        raise ConfigError("run.theta_range.count must be >= 1")
    if spacing in ("linear", "lin"):
        vals = np.linspace(start, stop, count)
    elif spacing == "log":
        if not (start > 0 and stop > 0):
            raise ConfigError("run.theta_range: log spacing needs positive start and stop")
        vals = np.geomspace(start, stop, count)
    else:
        raise ConfigError(f"run.theta_range.spacing: unknown spacing {spacing!r}")
    return tuple(float(v) for v in vals)


def _expect(section: str, key: str, value, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{section}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _floats(section: str, key: str, value, n: int) -> tuple:
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(f"{section}.{key}: expected a list of {n} numbers")
    return tuple(_expect(section, key, v, float) for v in value)


def config_from_dict(data: dict) -> RunConfig:
    for sec, body in data.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        for key in body:
            if key not in SECTIONS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")

    kw = {}
    model = data.get("model", {})
    if "R" in model or "M" in model:
        if "mu" in model or "nu" in model:
            raise ConfigError("model: give either (mu, nu) or (R, M), not both")
        if not {"R", "M", "m"} <= set(model):
            raise ConfigError("model: R, m and M are all required")
        m = _expect("model", "m", model["m"], int)
        if m < 2 or m % 2:
            raise ConfigError(f"model.m: channel count must be even and >= 2, got {m}")
        kw.update(mu=None, nu=None, R=_floats("model", "R", model["R"], 4), m=m,
                  M=_floats("model", "M", model["M"], 2 * m))
    elif model:
        if not {"mu", "nu"} <= set(model):
            raise ConfigError("model: both mu and nu are required for the shortcut form")
        kw.update(mu=_expect("model", "mu", model["mu"], float),
                  nu=_expect("model", "nu", model["nu"], float))

    run = data.get("run", {})
    if "T" in run:
        kw["T"] = _expect("run", "T", run["T"], float)
    if "N" in run:
        kw["N"] = _expect("run", "N", run["N"], int)
    if "theta" in run and "theta_range" in run:
        raise ConfigError("run: give either theta or theta_range")
    if "theta" in run:
        th = run["theta"]
        th = th if isinstance(th, list) else [th]
        kw["thetas"] = tuple(_expect("run", "theta", v, float) for v in th)
    if "theta_range" in run:
        tr = run["theta_range"]
        if not isinstance(tr, dict):
            raise ConfigError("run.theta_range must be a table")
        for key in tr:
            if key not in THETA_RANGE_KEYS:
                raise ConfigError(f"unknown key run.theta_range.{key}")
        kw["thetas"] = theta_range(_expect("run.theta_range", "start", tr.get("start"), float),
                                   _expect("run.theta_range", "stop", tr.get("stop"), float),
                                   _expect("run.theta_range", "count", tr.get("count"), int),
                                   tr.get("spacing", "linear"))

    q = data.get("quadrature", {})
    if q:
        try:
            kw["quad"] = QuadratureConfig(
                nodes_per_panel=_expect("quadrature", "nodes_per_panel", q.get("nodes_per_panel", 8), int),
                panels_per_period=_expect("quadrature", "panels_per_period", q.get("panels_per_period", 8.0), float),
                min_panels=_expect("quadrature", "min_panels", q.get("min_panels", 16), int),
                max_nodes=_expect("quadrature", "max_nodes", q.get("max_nodes", 200_000), int))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"quadrature: {exc}") from None

    tol = data.get("tolerances", {})
    if "series_tol" in tol:
        kw["series_tol"] = _expect("tolerances", "series_tol", tol["series_tol"], float)
    ver = data.get("verify", {})
    if "nystrom_n" in ver:
        kw["nystrom_n"] = _expect("verify", "nystrom_n", ver["nystrom_n"], int)
    if "nystrom_functions" in ver:
        kw["nystrom_functions"] = _expect("verify", "nystrom_functions", ver["nystrom_functions"], int)
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
