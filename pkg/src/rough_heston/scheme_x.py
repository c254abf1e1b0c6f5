"""Euler scheme for the integrated-variance formulation.

The integrated variance ``X`` is simulated directly and replaced by its
running maximum ``Xbar`` wherever a quadratic variation is needed, so the
martingale increments ``sqrt(Xbar_k - Xbar_{k-1}) * Z_k`` are always well
defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import IncrementStream, TimeGrid
from .kernels import Kernel, KernelWeights, exact_linear_drift_convolution
from .model import ModelParams, PathFault

__all__ = [
    "XPath",
    "XBatch",
    "simulate_x_path",
    "simulate_x_batch",
    "theta_drift",
    "quadratic_variation_check",
]


@dataclass(frozen=True, eq=False)
class XPath:
    grid: TimeGrid
    X: np.ndarray
    Xbar: np.ndarray
    M: np.ndarray
    Mperp: np.ndarray
    Y: np.ndarray
    S: np.ndarray
    Z: np.ndarray
    Zperp: np.ndarray


@dataclass(frozen=True, eq=False)
class XBatch:
    grid: TimeGrid
    X: np.ndarray
    Xbar: np.ndarray
    M: np.ndarray
    Mperp: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Zperp: np.ndarray
    faults: np.ndarray
    negative_sqrt_args: int

    @property
    def S(self) -> np.ndarray:
        return np.exp(self.Y)

    def path(self, j: int) -> XPath:
        return XPath(grid=self.grid, X=self.X[j], Xbar=self.Xbar[j], M=self.M[j],
                     Mperp=self.Mperp[j], Y=self.Y[j], S=np.exp(self.Y[j]),
                     Z=self.Z[j], Zperp=self.Zperp[j])


def theta_drift(kernel: Kernel, weights: KernelWeights, theta: float,
                exact: bool = True) -> np.ndarray:
    """The ``theta * s`` contribution to ``X`` at every node.

    ``exact=True`` integrates ``K(t_k - s) theta s`` in closed form; otherwise the
    left-point sum ``sum_{i<k} K(t_k - t_i) theta t_i dt_{i+1}`` is used.
    """
    grid = weights.grid
    t = grid.nodes
    if exact:
        return np.asarray(exact_linear_drift_convolution(kernel, theta, t), dtype=float)
    out = np.zeros(grid.n + 1)
    src = theta * t[:-1] * grid.steps
    for k in range(1, grid.n + 1):
        out[k] = weights.row(k) @ src[:k]
    return out


def simulate_x_batch(params: ModelParams, weights: KernelWeights, kernel: Kernel,
                     Z: np.ndarray, Zperp: np.ndarray, exact_theta_drift: bool = True,
                     drift: np.ndarray | None = None) -> XBatch:
    """Simulate ``len(Z)`` paths; ``drift`` may carry a precomputed :func:`theta_drift`."""
    grid = weights.grid
    n = grid.n
    Z = np.atleast_2d(Z)
    Zperp = np.atleast_2d(Zperp)
    if Z.shape[1] != n or Zperp.shape != Z.shape:
        raise ValueError("increment arrays do not match the weight grid")
    m = Z.shape[0]
    dt = grid.steps
    lam, nu = params.lambda_, params.nu
    if drift is None:
        drift = theta_drift(kernel, weights, params.theta, exact_theta_drift)
    base = params.V0 * grid.nodes + drift

    X = np.empty((m, n + 1))
    Xbar = np.empty((m, n + 1))
    M = np.empty((m, n + 1))
    Mp = np.empty((m, n + 1))
    X[:, 0] = Xbar[:, 0] = M[:, 0] = Mp[:, 0] = 0.0
    src = np.empty((n, m))
    neg_sqrt = 0
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(1, n + 1):
            i = k - 1
            src[i] = (-lam * Xbar[:, i] + nu * M[:, i]) * dt[i]
            X[:, k] = base[k] + weights.row(k) @ src[:k]
            np.maximum(Xbar[:, i], X[:, k], out=Xbar[:, k])
            dq = Xbar[:, k] - Xbar[:, i]
            neg_sqrt += int(np.count_nonzero(dq < 0))
            sq = np.sqrt(dq)
            M[:, k] = M[:, i] + sq * Z[:, i]
            Mp[:, k] = Mp[:, i] + sq * Zperp[:, i]
        Y = math.log(params.S0) - 0.5 * Xbar + params.rho * M + params.rho_bar * Mp
    faults = ~(np.isfinite(X).all(axis=1) & np.isfinite(Y).all(axis=1))
    return XBatch(grid=grid, X=X, Xbar=Xbar, M=M, Mperp=Mp, Y=Y, Z=Z, Zperp=Zperp,
                  faults=faults, negative_sqrt_args=neg_sqrt)


def simulate_x_path(params: ModelParams, weights: KernelWeights, kernel: Kernel,
                    stream: IncrementStream, exact_theta_drift: bool = True) -> XPath:
    if stream.grid != weights.grid:
        raise ValueError("stream and weights are built on different grids")
    batch = simulate_x_batch(params, weights, kernel, stream.Z[None, :],
                             stream.Zperp[None, :], exact_theta_drift)
    if batch.faults[0]:
        bad = np.flatnonzero(~(np.isfinite(batch.X[0]) & np.isfinite(batch.Y[0])))
        raise PathFault("non-finite value in integrated-variance path", step=int(bad[0]))
    return batch.path(0)


_EPS = np.finfo(float).eps


def quadratic_variation_check(path: XPath, rtol: float = 1e-12) -> bool:
    """Check ``(M_i - M_{i-1})**2 == (Xbar_i - Xbar_{i-1}) * Z_i**2`` at every step,
    and likewise for ``Mperp``.

    The tolerance is ``rtol`` relative to the right-hand side plus the rounding
    picked up when the increment is recovered by differencing ``M``.
    """
    dq = np.diff(path.Xbar)
    for mart, z in ((path.M, path.Z), (path.Mperp, path.Zperp)):
        dm = np.diff(mart)
        lhs = dm * dm
        rhs = dq * z * z
        scale = np.maximum(np.abs(mart[1:]), np.abs(mart[:-1]))
        slack = 4.0 * _EPS * scale
        tol = rtol * np.abs(rhs) + 2.0 * np.abs(dm) * slack + slack * slack
        if not np.all(np.abs(lhs - rhs) <= tol):
            return False
    return True
