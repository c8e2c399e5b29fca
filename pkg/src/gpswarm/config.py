"""Experiment configuration files (TOML or JSON) mapped onto ``Experiment``."""

import json
import sys
from pathlib import Path

from .benchfns import DOMAIN_PRESETS, make_spec
from .core import ConfigurationError
from .harness import Experiment, derive_seed
from .optimizer import PsoParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENT_KEYS = {"runs", "budget_per_dim", "base_seed", "n_par", "variants", "reference_variant",
                   "refit_every", "fit_restarts", "memory_cap", "rho", "pooled_variance", "dim",
                   "record_every", "ball"}
FUNCTION_KEYS = {"name", "dim", "bounds", "shifted", "rotated", "offset", "label", "seed"}


def read_config(path):
    """Parse a TOML or JSON file into a dict; errors carry the path and line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigurationError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _typed(section, key, kind, where):
    value = section[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigurationError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def experiment_from_dict(data, overrides=None):
    """Build an ``Experiment``; non-None ``overrides`` replace ``[experiment]`` fields."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a table/object")
    _check_keys(data, {"experiment", "functions"}, "config")
    exp = dict(data.get("experiment", {}))
    _check_keys(exp, EXPERIMENT_KEYS, "experiment")
    for key, value in (overrides or {}).items():
        if value is not None:
            exp[key] = value
    int_fields = ("runs", "budget_per_dim", "base_seed", "n_par", "refit_every", "fit_restarts", "dim")
    for key in int_fields:
        if key in exp:
            _typed(exp, key, int, "experiment")
    if exp.get("memory_cap") is not None:
        _typed(exp, "memory_cap", int, "experiment")
    if "rho" in exp:
        _typed(exp, "rho", (int, float), "experiment")
    base_seed = exp.get("base_seed", 0)
    n_par = exp.get("n_par", 50)
    default_dim = exp.get("dim", 10)

    variants = exp.get("variants", ["spso2011", "a3", "b", "c1"])
    if not isinstance(variants, list) or not all(isinstance(v, str) for v in variants):
        raise ConfigurationError("experiment.variants: expected a list of variant names")
    ball = exp.get("ball", "linear")
    if not isinstance(ball, str):
        raise ConfigurationError("experiment.ball: expected a string")
    params = [PsoParams.preset(v, n_par=n_par, ball=ball) for v in variants]

    entries = data.get("functions", [])
    if not isinstance(entries, list):
        raise ConfigurationError("functions: expected an array of tables")
    specs = []
    for k, entry in enumerate(entries):
        where = f"functions[{k}]"
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigurationError(f"{where}: each function needs a name")
        _check_keys(entry, FUNCTION_KEYS, where)
        bounds = entry.get("bounds")
        if isinstance(bounds, str) and bounds not in DOMAIN_PRESETS:
            raise ConfigurationError(f"{where}.bounds: unknown preset {bounds!r}; known: {', '.join(DOMAIN_PRESETS)}")
        if isinstance(bounds, list):
            if len(bounds) != 2:
                raise ConfigurationError(f"{where}.bounds: expected [low, high]")
            bounds = (float(bounds[0]), float(bounds[1]))
        label = entry.get("label", entry["name"])
        seed = entry.get("seed", derive_seed(base_seed, label, "instance", 0))
        specs.append(make_spec(entry["name"], entry.get("dim", default_dim), seed=seed,
                               shifted=entry.get("shifted", False), rotated=entry.get("rotated", False),
                               offset=entry.get("offset", 0.0), bounds=bounds, label=label))
    return Experiment(
        functions=specs, variants=params, runs=exp.get("runs", 20),
        budget_per_dim=exp.get("budget_per_dim", 100), base_seed=base_seed,
        refit_every=exp.get("refit_every", 5), fit_restarts=exp.get("fit_restarts", 10),
        memory_cap=exp.get("memory_cap"), rho=float(exp.get("rho", 1.15)),
        reference_variant=exp.get("reference_variant"),
        pooled_variance=bool(exp.get("pooled_variance", False)),
        record_every=exp.get("record_every"))


def load_experiment(path, overrides=None):
    return experiment_from_dict(read_config(path), overrides)


def bundled_config(name="desk_scale.toml"):
    return Path(__file__).parent / "configs" / name
