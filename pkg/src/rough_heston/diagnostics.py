"""Desk-scale checks of the schemes' provable properties.

Limit theorems cannot be asserted on a finite grid, so each check measures
the discrete quantity that the theory controls: increment moments for the
Hölder bounds, exact monotonicity of the running maximum, nonnegativity of
every square-root argument, and centring of the discrete martingale.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import make_uniform_grid, sample_normal_block
from .kernels import Kernel, precompute_weights
from .model import ModelParams
from .scheme_v import simulate_v_batch
from .scheme_x import simulate_x_batch

__all__ = [
    "HolderReport",
    "InvariantReport",
    "MartingaleReport",
    "simulate_batch",
    "holder_scaling_report",
    "structural_invariant_sweep",
    "martingale_mean_check",
]

_BLOCK = 1024


def simulate_batch(scheme: str, params: ModelParams, kernel: Kernel, n: int, num_paths: int,
                   seed: int = 0, normal_shift: float = 0.0):
    """Yield batches of ``scheme`` paths (block by block, in path order).

    ``normal_shift`` adds a constant to every Gaussian draw; it exists only to
    build negative controls.
    """
    grid = make_uniform_grid(n, params.T)
    weights = precompute_weights(kernel, grid)
    for start in range(0, num_paths, _BLOCK):
        count = min(_BLOCK, num_paths - start)
        Z, Zp = sample_normal_block(seed, start, count, n)
        if normal_shift:
            Z = Z + normal_shift
            Zp = Zp + normal_shift
        if scheme == "volterra":
            yield simulate_v_batch(params, weights, Z, Zp)
        elif scheme == "integrated":
            yield simulate_x_batch(params, weights, kernel, Z, Zp)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class HolderReport:
    scheme: str
    lags: list  # (s, t) pairs
    empirical_moments: list
    fitted_slope: float
    target: float

    @property
    def deviation(self) -> float:
        return self.fitted_slope - self.target

    def as_dict(self) -> dict:
        d = asdict(self)
        d["deviation"] = self.deviation
        return d


def holder_scaling_report(scheme: str, params: ModelParams, kernel: Kernel, n: int, M: int,
                          p: float = 2.0, seed: int = 0, num_lags: int = 6) -> HolderReport:
    """Fit ``log E|U_t - U_s|^p`` against ``log(t - s)`` for ``s = T/2`` and lags
    ``T/2, T/4, ..., T/2**num_lags``; ``U`` is ``V`` (volterra) or ``X`` (integrated).

    The target slope is ``p * min(H, 1)`` with ``H`` the kernel's Hurst exponent.
    """
    if n < 64 or n & (n - 1):
        raise ValueError("n must be a power of two >= 64")
    if n >> num_lags < 1:
        raise ValueError("grid too coarse for the requested lags")
    T = params.T
    s_idx = n // 2
    lag_steps = [n // 2 >> j for j in range(num_lags)][::-1]
    acc = np.zeros(len(lag_steps))
    for batch in simulate_batch(scheme, params, kernel, n, M, seed):
        U = batch.V if scheme == "volterra" else batch.X
        base = U[:, s_idx]
        for j, L in enumerate(lag_steps):
            acc[j] += np.sum(np.abs(U[:, s_idx + L] - base) ** p)
    moments = acc / M
    dt = np.array(lag_steps) * T / n
    slope = float(np.polyfit(np.log(dt), np.log(moments), 1)[0])
    lags = [(T / 2, T / 2 + d) for d in dt]
    return HolderReport(scheme=scheme, lags=lags, empirical_moments=moments.tolist(),
                        fitted_slope=slope, target=p * min(kernel.hurst_exponent, 1.0))


@dataclass
class InvariantReport:
    scheme: str
    n: int
    num_paths: int
    monotonicity_violations: int
    negative_sqrt_arguments: int
    negative_variance_fraction: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def structural_invariant_sweep(scheme: str, params: ModelParams, kernel: Kernel, n: int, M: int,
                               seed: int = 0) -> InvariantReport:
    """Count exact violations of ``Xbar_k >= Xbar_{k-1}`` and of ``sqrt`` arguments ``>= 0``.

    For the volterra scheme, whose ``X`` is a Riemann sum and has no running
    maximum, the monotonicity count refers to the running maximum of that sum;
    the fraction of negative ``V`` values is reported for information.
    """
    mono = 0
    neg_sqrt = 0
    neg_v = 0
    for batch in simulate_batch(scheme, params, kernel, n, M, seed):
        neg_sqrt += batch.negative_sqrt_args
        if scheme == "integrated":
            xbar = batch.Xbar
        else:
            xbar = np.maximum.accumulate(batch.X, axis=1)
            neg_v += int(np.count_nonzero(batch.V < 0))
        mono += int(np.count_nonzero(xbar[:, 1:] < xbar[:, :-1]))
    frac = neg_v / (M * (n + 1)) if scheme == "volterra" else None
    return InvariantReport(scheme=scheme, n=n, num_paths=M, monotonicity_violations=mono,
                           negative_sqrt_arguments=neg_sqrt, negative_variance_fraction=frac)


@dataclass
class MartingaleReport:
    mean: float
    standard_error: float
    z_score: float
    passed: bool
    threshold: float = 4.0

    def as_dict(self) -> dict:
        return asdict(self)


def martingale_mean_check(params: ModelParams, kernel: Kernel, n: int, M: int, seed: int = 0,
                          threshold: float = 4.0, normal_shift: float = 0.0) -> MartingaleReport:
    """z-score of the sample mean of ``M_T`` under the integrated scheme."""
    if M < 2:
        raise ValueError("need at least two paths")
    total = 0.0
    total_sq = 0.0
    for batch in simulate_batch("integrated", params, kernel, n, M, seed, normal_shift):
        mt = batch.M[:, -1]
        total += float(np.sum(mt))
        total_sq += float(np.sum(mt * mt))
    mean = total / M
    var = max(total_sq / M - mean * mean, 0.0)
    se = math.sqrt(var / M)
    z = 0.0 if se == 0.0 else mean / se
    return MartingaleReport(mean=mean, standard_error=se, z_score=z,
                            passed=abs(z) <= threshold, threshold=threshold)
