"""Experiment configuration files.

A config is a small YAML document with up to five sections::

    model:  {S0: 1.0, V0: 0.02, theta: 0.02, lambda: 0.3, nu: 0.3, rho: -0.7, T: 1.0}
    kernel: {type: power_law, c: gamma_normalized, H: 0.1}
    payoff: {type: european_call, strike: 1.0}
    mc:     {num_paths: 100000, n: 320, scheme: integrated, seed: 0, workers: 1}
    reference: {damping: 1.5, riccati_steps: 400}
    output: csv

Every section is optional; missing values fall back to the parameter set of
the numerical experiments (``DEFAULT_CONFIG``).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .kernels import Kernel, kernel_from_spec
from .model import ModelParams
from .monte_carlo import SCHEMES, McConfig
from .payoffs import Payoff, payoff_from_spec

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULT_CONFIG", "load_config", "parse_config"]

DEFAULT_CONFIG: dict = {
    "model": {"S0": 1.0, "V0": 0.02, "theta": 0.02, "lambda": 0.3, "nu": 0.3,
              "rho": -0.7, "T": 1.0},
    "kernel": {"type": "power_law", "c": "gamma_normalized", "H": 0.1},
    "payoff": {"type": "european_call", "strike": 1.0},
    "mc": {"num_paths": 100000, "n": 320, "scheme": "integrated", "seed": 0, "workers": 1,
           "exact_theta_drift": True, "clip_variance_in_X": False},
    "reference": {"damping": 1.5, "riccati_steps": 400},
    "output": "csv",
}

_SECTIONS = set(DEFAULT_CONFIG)
_MC_KEYS = set(DEFAULT_CONFIG["mc"]) | {"chunk_size"}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    kernel: Kernel
    payoff: Payoff
    mc: McConfig
    damping: float = 1.5
    riccati_steps: int = 400
    output: str = "csv"


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key in ("kernel", "payoff"):
            out[key] = copy.deepcopy(val)  # tagged records are replaced whole
        elif isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key].update(val)
        else:
            out[key] = val
    return out


def parse_config(doc: dict | None) -> ExperimentConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(doc) - _SECTIONS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    d = _merge(DEFAULT_CONFIG, doc)

    try:
        model = ModelParams.from_dict(d["model"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        kernel = kernel_from_spec(d["kernel"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("kernel", str(exc)) from None
    try:
        payoff = payoff_from_spec(d["payoff"], model.V0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("payoff", str(exc)) from None

    mc = d["mc"]
    unknown = set(mc) - _MC_KEYS
    if unknown:
        raise ConfigError(f"mc.{sorted(unknown)[0]}", "unknown field")
    if mc.get("scheme") not in SCHEMES:
        raise ConfigError("mc.scheme", f"must be one of {SCHEMES}")
    try:
        mc_cfg = McConfig(num_paths=int(mc["num_paths"]), master_seed=int(mc["seed"]),
                          scheme=mc["scheme"], n=int(mc["n"]),
                          worker_count=mc["workers"] if mc["workers"] == "auto" else int(mc["workers"]),
                          exact_theta_drift=bool(mc["exact_theta_drift"]),
                          clip_variance_in_X=bool(mc["clip_variance_in_X"]),
                          **({"chunk_size": int(mc["chunk_size"])} if "chunk_size" in mc else {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError("mc", str(exc)) from None

    ref = d["reference"]
    if not isinstance(ref, dict) or set(ref) - {"damping", "riccati_steps"}:
        raise ConfigError("reference", "only 'damping' and 'riccati_steps' are allowed")
    damping = float(ref["damping"])
    if not damping > 0:
        raise ConfigError("reference.damping", "must be positive")
    steps = int(ref["riccati_steps"])
    if steps < 200:
        raise ConfigError("reference.riccati_steps", "must be at least 200")
    if d["output"] not in ("csv", "json"):
        raise ConfigError("output", "must be 'csv' or 'json'")
    return ExperimentConfig(model=model, kernel=kernel, payoff=payoff, mc=mc_cfg,
                            damping=damping, riccati_steps=steps, output=d["output"])


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a YAML config; ``None`` gives the built-in defaults."""
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return parse_config(doc)
