"""Path-functional payoffs.

All payoffs act on node arrays of shape ``(..., n+1)`` so a whole batch of
paths is priced in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TimeGrid

__all__ = [
    "Payoff",
    "EuropeanCall",
    "AsianCall",
    "LookbackCall",
    "VarianceSwap",
    "VarianceCall",
    "evaluate",
    "payoff_from_spec",
]


class Payoff:
    name: str = "payoff"

    def __call__(self, S: np.ndarray, X: np.ndarray, grid: TimeGrid) -> np.ndarray:
        raise NotImplementedError

    def as_dict(self) -> dict:
        d = {"type": self.name}
        if hasattr(self, "strike"):
            d["strike"] = self.strike
        return d


def _check_strike(strike: float) -> None:
    if not strike >= 0:
        raise ValueError("strike must be nonnegative")


@dataclass(frozen=True)
class EuropeanCall(Payoff):
    strike: float
    name = "european_call"

    def __post_init__(self):
        _check_strike(self.strike)

    def __call__(self, S, X, grid):
        return np.maximum(np.asarray(S)[..., -1] - self.strike, 0.0)


@dataclass(frozen=True)
class AsianCall(Payoff):
    """Call on ``(T/n) * sum_{k=1..n} S_k``; ``t_0`` is excluded from the average."""

    strike: float
    name = "asian_call"

    def __post_init__(self):
        _check_strike(self.strike)

    def __call__(self, S, X, grid):
        S = np.asarray(S)
        avg = grid.T / grid.n * S[..., 1:].sum(axis=-1)
        return np.maximum(avg - self.strike, 0.0)


@dataclass(frozen=True)
class LookbackCall(Payoff):
    strike: float
    name = "lookback_call"

    def __post_init__(self):
        _check_strike(self.strike)

    def __call__(self, S, X, grid):
        return np.maximum(np.asarray(S).max(axis=-1) - self.strike, 0.0)


@dataclass(frozen=True)
class VarianceSwap(Payoff):
    """Pays ``X_T``. Not floored: a discretised ``X_T`` can dip below zero."""

    name = "variance_swap"

    def __call__(self, S, X, grid):
        return np.asarray(X)[..., -1].copy()


@dataclass(frozen=True)
class VarianceCall(Payoff):
    """``(X_T - strike)_+``; the experiments use ``strike = V0``."""

    strike: float
    name = "variance_call"

    def __post_init__(self):
        _check_strike(self.strike)

    def __call__(self, S, X, grid):
        return np.maximum(np.asarray(X)[..., -1] - self.strike, 0.0)


def evaluate(payoff: Payoff, S, X, grid: TimeGrid):
    S = np.asarray(S, dtype=float)
    X = np.asarray(X, dtype=float)
    if S.shape[-1] != grid.n + 1 or X.shape[-1] != grid.n + 1:
        raise ValueError("path arrays must have n+1 nodes")
    out = payoff(S, X, grid)
    return float(out) if np.ndim(out) == 0 else out


_KINDS = {
    "european_call": EuropeanCall,
    "asian_call": AsianCall,
    "lookback_call": LookbackCall,
}


def payoff_from_spec(spec: dict, V0: float) -> Payoff:
    """Build a payoff from ``{"type": ..., "strike": ...}``.

    ``variance_call`` takes no strike: it is struck at ``V0``.
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("payoff spec must be a mapping with a 'type' field")
    kind = spec["type"]
    extra = set(spec) - {"type", "strike"}
    if extra:
        raise ValueError(f"unknown payoff fields: {sorted(extra)}")
    if kind in _KINDS:
        if "strike" not in spec:
            raise ValueError(f"{kind} needs a strike")
        return _KINDS[kind](float(spec["strike"]))
    if kind == "variance_swap":
        if "strike" in spec:
            raise ValueError("variance_swap takes no strike")
        return VarianceSwap()
    if kind == "variance_call":
        if "strike" in spec:
            raise ValueError("variance_call is struck at V0; remove the strike field")
        return VarianceCall(V0)
    raise ValueError(f"unknown payoff type {kind!r}")
