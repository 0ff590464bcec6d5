"""Experiment configuration: TOML schema, validation, and round-trip dump.

The file has four sections: ``[model]`` (kernel family and rates, or the
two-population specification), ``[run]`` (horizon, path count, seed, step),
``[query]`` (moment grid and transform exponents) and ``[output]``.  Unknown
keys anywhere are rejected.  ``dump_config`` emits the normalized form,
which reparses to an identical configuration.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .kernels import (MarkDistribution, MarkKernel, OdeKernel, TimeFactor,
                      delayed_kernel, exponential_kernel,
                      kernel_from_exponential_modes, power_law_kernel)
from .models import GeneralModel, RateFunction, StandardModel

__all__ = ["ExperimentConfig", "load_config", "parse_config", "dump_config"]

ENV_SEED = "HAWKES_SEED"

_KERNEL_KEYS = {
    "exponential": {"rate"},
    "delayed": {"alpha", "beta"},
    "power_law": {"tau0", "ratio", "epsilon", "terms"},
    "exp_modes": {"weights", "rates"},
    "raw": {"c", "m_init"},
}
_RATE_KEYS = {"constant": {"value"}, "cos_squared": {"amplitude", "alpha"}}
_TF_KEYS = {"constant": {"value"}, "cos_squared": {"alpha", "amplitude"},
            "polynomial": {"coeffs"}}
_MARK_KEYS = {"point_mass": {"value"}, "uniform": {"a", "b"},
              "exponential": {"rate"}, "discrete": {"values", "probs"}}

_RUN_DEFAULTS = {"T": 1.0, "n_paths": 100000, "seed": 12345, "grid_step": 1e-3,
                 "max_events": 10000000, "z_max": 4.0,
                 "martingale_paths": 10000, "ks_paths": 100, "ks_horizon": 400.0}
_OUTPUT_DEFAULTS = {"directory": "out", "formats": ["csv", "json"]}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return section[key]


def _build_kernel(section: dict, where: str) -> OdeKernel:
    family = _require(section, "family", where)
    if family not in _KERNEL_KEYS:
        raise ConfigError(f"unknown kernel family {family!r} in [{where}]")
    _check_keys(section, _KERNEL_KEYS[family] | {"family"}, where)
    if family == "exponential":
        return exponential_kernel(float(_require(section, "rate", where)))
    if family == "delayed":
        return delayed_kernel(float(_require(section, "alpha", where)),
                              float(_require(section, "beta", where)))
    if family == "power_law":
        return power_law_kernel(float(_require(section, "tau0", where)),
                                float(_require(section, "ratio", where)),
                                float(_require(section, "epsilon", where)),
                                int(_require(section, "terms", where)))
    if family == "exp_modes":
        return kernel_from_exponential_modes(_require(section, "weights", where),
                                             _require(section, "rates", where))
    return OdeKernel(_require(section, "c", where), _require(section, "m_init", where))


def _build_rate(section: dict, where: str) -> RateFunction:
    family = _require(section, "family", where)
    if family not in _RATE_KEYS:
        raise ConfigError(f"unknown rate family {family!r} in [{where}]")
    _check_keys(section, _RATE_KEYS[family] | {"family"}, where)
    if family == "constant":
        return RateFunction.constant(float(_require(section, "value", where)))
    return RateFunction.cos_squared(float(_require(section, "amplitude", where)),
                                    float(_require(section, "alpha", where)))


def _build_time_factor(section: dict, where: str) -> TimeFactor:
    family = _require(section, "family", where)
    if family not in _TF_KEYS:
        raise ConfigError(f"unknown time-factor family {family!r} in [{where}]")
    _check_keys(section, _TF_KEYS[family] | {"family"}, where)
    if family == "constant":
        return TimeFactor.constant(float(section.get("value", 1.0)))
    if family == "cos_squared":
        return TimeFactor.cos_squared(float(_require(section, "alpha", where)),
                                      float(section.get("amplitude", 1.0)))
    return TimeFactor.polynomial(_require(section, "coeffs", where))


def _build_marks(section: dict, where: str) -> MarkDistribution:
    family = _require(section, "family", where)
    if family not in _MARK_KEYS:
        raise ConfigError(f"unknown mark family {family!r} in [{where}]")
    _check_keys(section, _MARK_KEYS[family] | {"family"}, where)
    if family == "point_mass":
        return MarkDistribution.point_mass(float(_require(section, "value", where)))
    if family == "uniform":
        return MarkDistribution.uniform(float(_require(section, "a", where)),
                                        float(_require(section, "b", where)))
    if family == "exponential":
        return MarkDistribution.exponential(float(_require(section, "rate", where)))
    return MarkDistribution.discrete(_require(section, "values", where),
                                     _require(section, "probs", where))


def _build_mark_kernel(section: dict, where: str) -> MarkKernel:
    _check_keys(section, {"kernel", "init", "time_factor", "marks"}, where)
    ksec = _require(section, "kernel", where)
    family = _require(ksec, "family", f"{where}.kernel")
    if family == "exponential":
        _check_keys(ksec, {"family", "rate"}, f"{where}.kernel")
        c = [0.0, -float(_require(ksec, "rate", f"{where}.kernel"))]
    elif family == "raw":
        _check_keys(ksec, {"family", "c"}, f"{where}.kernel")
        c = [float(v) for v in _require(ksec, "c", f"{where}.kernel")]
    else:
        raise ConfigError(
            f"mark kernels support families 'exponential' and 'raw', got {family!r}")
    init_sec = _require(section, "init", where)
    _check_keys(init_sec, {"entries"}, f"{where}.init")
    entries = []
    for e in _require(init_sec, "entries", f"{where}.init"):
        if not (isinstance(e, list) and len(e) == 2 and e[0] in ("const", "linear")):
            raise ConfigError(f"init entries must be ['const'|'linear', value] in [{where}]")
        entries.append((e[0], float(e[1])))
    tf = _build_time_factor(section.get("time_factor", {"family": "constant", "value": 1.0}),
                            f"{where}.time_factor")
    marks = _build_marks(section.get("marks", {"family": "point_mass", "value": 1.0}),
                         f"{where}.marks")
    return MarkKernel(c, entries, time_factor=tf, mark_dist=marks)


@dataclass
class ExperimentConfig:
    """Parsed, validated, normalized experiment description."""

    raw: dict
    model: object          # StandardModel | GeneralModel
    T: float
    n_paths: int
    seed: int
    grid_step: float
    max_events: int
    z_max: float
    martingale_paths: int
    ks_paths: int
    ks_horizon: float
    moments_grid: list
    laplace_theta: list
    laplace_exponents: list
    count_exponents: list
    martingale: bool
    out_dir: str
    formats: list

    @property
    def is_general(self) -> bool:
        return isinstance(self.model, GeneralModel)


def parse_config(data: dict, seed_override=None) -> ExperimentConfig:
    _check_keys(data, {"model", "run", "query", "output"}, "<root>")
    if "model" not in data:
        raise ConfigError("missing [model] section")
    msec = dict(data["model"])
    mtype = msec.get("type", "standard")
    if mtype == "standard":
        _check_keys(msec, {"type", "mu", "kernel"}, "model")
        if "kernel" not in msec:
            raise ConfigError("missing [model.kernel] section")
        kernel = _build_kernel(msec["kernel"], "model.kernel")
        mu = float(_require(msec, "mu", "model"))
        model = StandardModel(kernel=kernel, mu=mu)
    elif mtype == "general":
        _check_keys(msec, {"type", "mu", "rho", "phi", "psi"}, "model")
        mu = _build_rate(_require(msec, "mu", "model"), "model.mu")
        rho = _build_rate(_require(msec, "rho", "model"), "model.rho")
        phi = _build_mark_kernel(_require(msec, "phi", "model"), "model.phi")
        psi = _build_mark_kernel(msec["psi"], "model.psi") if "psi" in msec else None
        model = GeneralModel(mu=mu, rho=rho, phi=phi, psi=psi)
    else:
        raise ConfigError(f"unknown model type {mtype!r}")

    rsec = dict(data.get("run", {}))
    _check_keys(rsec, set(_RUN_DEFAULTS), "run")
    run = {**_RUN_DEFAULTS, **rsec}
    if seed_override is not None:
        run["seed"] = int(seed_override)
    elif os.environ.get(ENV_SEED):
        run["seed"] = int(os.environ[ENV_SEED])
    if run["T"] <= 0:
        raise ConfigError("run.T must be positive")
    if run["n_paths"] < 100:
        raise ConfigError("run.n_paths must be at least 100")

    qsec = dict(data.get("query", {}))
    _check_keys(qsec, {"moments_grid", "laplace_theta", "laplace_exponents",
                       "count_exponents", "martingale"}, "query")
    moments_grid = [float(t) for t in qsec.get("moments_grid", [run["T"]])]
    if any(t < 0 or t > run["T"] for t in moments_grid):
        raise ConfigError("query.moments_grid values must lie in [0, run.T]")
    laplace_theta = [[float(a), float(b)] for a, b in qsec.get("laplace_theta",
                                                               [[-0.5, -0.2]])]
    laplace_exponents = [[float(x) for x in v]
                         for v in qsec.get("laplace_exponents", [])]
    count_exponents = [float(x) for x in qsec.get("count_exponents", [-0.3])]
    martingale = bool(qsec.get("martingale", True))

    osec = dict(data.get("output", {}))
    _check_keys(osec, set(_OUTPUT_DEFAULTS), "output")
    out = {**_OUTPUT_DEFAULTS, **osec}
    bad = set(out["formats"]) - {"csv", "json"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")

    normalized = {
        "model": data["model"],
        "run": run,
        "query": {"moments_grid": moments_grid, "laplace_theta": laplace_theta,
                  "laplace_exponents": laplace_exponents,
                  "count_exponents": count_exponents, "martingale": martingale},
        "output": out,
    }
    return ExperimentConfig(
        raw=normalized, model=model,
        T=float(run["T"]), n_paths=int(run["n_paths"]), seed=int(run["seed"]),
        grid_step=float(run["grid_step"]), max_events=int(run["max_events"]),
        z_max=float(run["z_max"]), martingale_paths=int(run["martingale_paths"]),
        ks_paths=int(run["ks_paths"]), ks_horizon=float(run["ks_horizon"]),
        moments_grid=moments_grid, laplace_theta=laplace_theta,
        laplace_exponents=laplace_exponents, count_exponents=count_exponents,
        martingale=martingale, out_dir=str(out["directory"]),
        formats=list(out["formats"]))


def load_config(path, overrides=None, seed_override=None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    for key, value in (overrides or []):
        _apply_override(data, key, value)
    return parse_config(data, seed_override=seed_override)


def _apply_override(data: dict, dotted: str, value_text: str):
    try:
        value = tomllib.loads(f"x = {value_text}")["x"]
    except tomllib.TOMLDecodeError:
        raise ConfigError(f"cannot parse override value {value_text!r}")
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} crosses a scalar")
    node[parts[-1]] = value


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = repr(float(v))
        return s if any(ch in s for ch in ".eE") else s + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def _dump_table(d: dict, prefix: str, lines: list):
    scalars = [(k, v) for k, v in d.items() if not isinstance(v, dict)]
    tables = [(k, v) for k, v in d.items() if isinstance(v, dict)]
    if prefix:
        lines.append(f"[{prefix}]")
    for k, v in scalars:
        lines.append(f"{k} = {_fmt_value(v)}")
    for k, v in tables:
        lines.append("")
        _dump_table(v, f"{prefix}.{k}" if prefix else k, lines)


def dump_config(cfg: ExperimentConfig) -> str:
    """Normalized TOML text; reparsing it yields an identical configuration."""
    lines: list = []
    _dump_table(cfg.raw, "", lines)
    return "\n".join(lines) + "\n"
