from __future__ import annotations

import math
from dataclasses import asdict, dataclass


class PathFault(ArithmeticError):
    """A simulated path produced a non-finite value."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class ModelParams:
    """Rough Heston parameters.

    ``theta`` is the constant drift level of the variance (the drift is
    ``theta - lambda_ * V``), ``lambda_`` the mean-reversion speed and ``nu``
    the vol-of-vol. Zero values of ``V0``, ``theta``, ``lambda_`` and ``nu`` are
    accepted so that degenerate deterministic cases can be simulated.
    """

    S0: float = 1.0
    V0: float = 0.02
    theta: float = 0.02
    lambda_: float = 0.3
    nu: float = 0.3
    rho: float = -0.7
    T: float = 1.0

    def __post_init__(self):
        for name in ("S0", "V0", "theta", "lambda_", "nu", "rho", "T"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.S0 > 0:
            raise ValueError("S0 must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        for name in ("V0", "theta", "lambda_", "nu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")

    @property
    def rho_bar(self) -> float:
        return math.sqrt(1.0 - self.rho * self.rho)

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown model fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


# parameter set used for the numerical experiments
EXPERIMENT_PARAMS = ModelParams(S0=1.0, V0=0.02, theta=0.02, lambda_=0.3, nu=0.3, rho=-0.7, T=1.0)
EXPERIMENT_HURST = 0.1
