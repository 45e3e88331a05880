"""Run configuration: a single TOML file with nested tables, schema-checked.

Every experiment reads one declarative config; unknown keys are rejected so a
typo cannot silently fall back to a default.  Model builtins are addressed by
name plus a parameter table.  An empty (or absent) config runs the defaults
below.
"""

from __future__ import annotations

import copy
import os

import numpy as np

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from .errors import ConfigError
from .ito_euler import ItoSpec, LinearCoefficients, TanhAttraction
from .meanfield_chain import MeanFieldChainSpec
from .toy_model import ToyModelSpec

#: environment variable holding the default output directory
OUTPUT_ENV_VAR = "MEANFIELD_LDP_OUT"

DEFAULT_CONFIG = {
    "seed": 20240,
    "output": {"directory": "reports"},
    "toy": {
        "b": {"kind": "tanh", "scale": 1.0},
        "variant": "standard",
        "indicator_set": [[0.0, 1.5]],
        "N": 1000,
        "seed": 7,
    },
    "chain": {
        "states": ["s1", "s2"],
        "q": [1.0, 0.0],
        "T": 2,
        "A": {
            "family": "mix",
            "base": [[0.7, 0.3], [0.6, 0.4]],
            "alternative": [[0.3, 0.7], [0.4, 0.6]],
            "mix": [0.0, 1.0],
        },
        "N": 50,
        "seed": 11,
    },
    "ito": {
        "family": "linear",
        "state_matrix": [[-0.5]],
        "mean_matrix": [[0.25]],
        "offset": [0.1],
        "dispersion": [[1.0]],
        "x0": [1.0],
        "T": 1.0,
        "steps": 8,
        "scale": 1.0,
        "N": 1000,
        "seed": 13,
    },
    "sanov": {
        "alphabet_size": 2,
        "mu": [0.5, 0.5],
        "n_schedule": list(range(4, 201, 4)),
    },
    "decay": {"n_schedule": [20, 40, 60]},
    "lln": {
        "systems": ["toy", "ito"],
        "n_schedule": [100, 1000, 10000],
        "replications": 20,
        "grid_points": 81,
        "grid_halfwidth": 6.0,
    },
    "identity": {"seed": 2024, "mutation_scale": 0.0},
    "rate": {
        "toy_mean": [1.0, 1.0],
        "toy_cov": [[1.0, 1.0], [1.0, 2.0]],
        "chain_eta_file": "",
        "ito_shift": 1.0,
    },
    "simulate": {"system": "toy"},
}


def load_config(path: str | None = None) -> dict:
    """Load, validate, and merge a TOML config over the defaults."""
    merged = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path, "rb") as handle:
                user = _toml.load(handle)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except _toml.TOMLDecodeError as err:
            raise ConfigError(f"malformed TOML in {path}: {err}") from None
        _merge(merged, user, trail="")
    _validate(merged)
    return merged


def _merge(base: dict, override: dict, trail: str):
    for key, value in override.items():
        here = f"{trail}.{key}" if trail else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here!r} must be a table")
            _merge(base[key], value, here)
        else:
            base[key] = value


def _validate(cfg: dict):
    toy = cfg["toy"]
    if toy["b"].get("kind") not in ("constant", "tanh", "cosine"):
        raise ConfigError(f"toy.b.kind {toy['b'].get('kind')!r} is not a builtin")
    if toy["variant"] not in ("standard", "indicator"):
        raise ConfigError(f"toy.variant {toy['variant']!r} unknown")
    chain = cfg["chain"]
    if len(chain["q"]) != len(chain["states"]):
        raise ConfigError("chain.q length must match chain.states")
    if chain["A"].get("family") not in ("mix", "constant"):
        raise ConfigError(f"chain.A.family {chain['A'].get('family')!r} is not a builtin")
    if cfg["ito"]["family"] not in ("linear", "tanh_attraction"):
        raise ConfigError(f"ito.family {cfg['ito']['family']!r} is not a builtin")
    for name in ("sanov", "decay", "lln"):
        schedule = cfg[name]["n_schedule"]
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError(f"{name}.n_schedule must be strictly increasing")
    if cfg["lln"]["grid_points"] > 200:
        raise ConfigError("lln.grid_points cannot exceed the 200-atom distance cap")
    for system in cfg["lln"]["systems"]:
        if system not in ("toy", "ito"):
            raise ConfigError(f"lln system {system!r} unknown")
    if cfg["simulate"]["system"] not in ("toy", "chain", "ito"):
        raise ConfigError(f"simulate.system {cfg['simulate']['system']!r} unknown")


def output_directory(cfg: dict, override: str | None = None) -> str:
    """CLI flag > environment variable > config value."""
    if override:
        return override
    return os.environ.get(OUTPUT_ENV_VAR) or cfg["output"]["directory"]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_toy_spec(cfg: dict) -> ToyModelSpec:
    toy = cfg["toy"]
    if toy["variant"] == "indicator":
        return ToyModelSpec.indicator([tuple(iv) for iv in toy["indicator_set"]])
    return ToyModelSpec.standard(toy["b"]["kind"], float(toy["b"]["scale"]))


def build_chain_spec(cfg: dict) -> MeanFieldChainSpec:
    chain = cfg["chain"]
    family = chain["A"]
    states = list(chain["states"])
    m = len(states)
    base = np.asarray(family["base"], dtype=float)
    if base.shape != (m, m):
        raise ConfigError(f"chain.A.base must be {m}x{m}")
    if family["family"] == "constant":
        transition = lambda t, p: base  # noqa: E731 - tiny closure
    else:
        alternative = np.asarray(family["alternative"], dtype=float)
        mix = np.asarray(family["mix"], dtype=float)
        if alternative.shape != (m, m) or mix.shape != (m,):
            raise ConfigError("chain.A.alternative/mix shapes do not match the states")
        if np.any(mix < 0.0) or np.any(mix > 1.0):
            raise ConfigError("chain.A.mix coefficients must lie in [0, 1]")

        def transition(t, p, _a0=base, _a1=alternative, _c=mix):
            eps = float(_c @ p)
            return (1.0 - eps) * _a0 + eps * _a1

    return MeanFieldChainSpec(states, chain["q"], transition, int(chain["T"]))


def build_ito_spec(cfg: dict) -> ItoSpec:
    ito = cfg["ito"]
    dispersion = np.asarray(ito["dispersion"], dtype=float)
    x0 = np.asarray(ito["x0"], dtype=float)
    dim = x0.size
    noise_dim = dispersion.shape[1] if dispersion.ndim == 2 else dim
    if ito["family"] == "linear":
        coefficients = LinearCoefficients(
            ito["state_matrix"], ito["mean_matrix"], ito["offset"], dispersion
        )
    else:
        coefficients = TanhAttraction(float(ito["scale"]), dispersion)
    return ItoSpec(dim, noise_dim, x0, float(ito["T"]), coefficients)
