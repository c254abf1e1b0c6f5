"""Euler scheme for the stochastic Volterra formulation of rough Heston.

On a grid ``t_0 < ... < t_n`` the log-price and variance are advanced as::

    V_k = V0 + sum_{i<k} K(t_k - t_i) * ((theta - lam*V_i^+) dt_{i+1} + nu*sqrt(V_i^+) dW_{i+1})
    Y_k = Y_{k-1} - V_{k-1}^+ dt_k / 2 + sqrt(V_{k-1}^+) (rho dW_k + sqrt(1-rho^2) dW'_k)

Negative variances are kept in the output; only their positive part enters
the drift and diffusion terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import IncrementStream, TimeGrid
from .kernels import KernelWeights
from .model import ModelParams, PathFault

__all__ = ["VPath", "VBatch", "simulate_v_path", "simulate_v_batch", "integrated_variance"]


@dataclass(frozen=True, eq=False)
class VPath:
    grid: TimeGrid
    Y: np.ndarray
    V: np.ndarray
    S: np.ndarray
    X: np.ndarray


@dataclass(frozen=True, eq=False)
class VBatch:
    """Stacked paths, one row per path; ``faults`` flags non-finite rows."""

    grid: TimeGrid
    Y: np.ndarray
    V: np.ndarray
    X: np.ndarray
    faults: np.ndarray
    negative_sqrt_args: int

    @property
    def S(self) -> np.ndarray:
        return np.exp(self.Y)

    def path(self, j: int) -> VPath:
        return VPath(grid=self.grid, Y=self.Y[j], V=self.V[j], S=np.exp(self.Y[j]), X=self.X[j])


def _left_riemann(V: np.ndarray, steps: np.ndarray, clip: bool) -> np.ndarray:
    vals = np.maximum(V[..., :-1], 0.0) if clip else V[..., :-1]
    X = np.zeros(V.shape)
    np.cumsum(vals * steps, axis=-1, out=X[..., 1:])
    return X


def integrated_variance(path: VPath | np.ndarray, grid: TimeGrid | None = None,
                        clip_variance_in_X: bool = False) -> np.ndarray:
    """Left-endpoint sums ``X_k = sum_{i<k} V_i * dt_{i+1}``.

    Accepts a :class:`VPath` or a raw variance array (then ``grid`` is needed).
    """
    if isinstance(path, VPath):
        V, grid = path.V, path.grid
    else:
        V = np.asarray(path, dtype=float)
        if grid is None:
            raise ValueError("grid is required when passing a raw array")
    return _left_riemann(V, grid.steps, clip_variance_in_X)


def simulate_v_batch(params: ModelParams, weights: KernelWeights, Z: np.ndarray,
                     Zperp: np.ndarray, clip_variance_in_X: bool = False) -> VBatch:
    """Simulate ``len(Z)`` paths driven by unit normals ``Z``, ``Zperp`` of shape (M, n)."""
    grid = weights.grid
    n = grid.n
    Z = np.atleast_2d(Z)
    Zperp = np.atleast_2d(Zperp)
    if Z.shape[1] != n or Zperp.shape != Z.shape:
        raise ValueError("increment arrays do not match the weight grid")
    m = Z.shape[0]
    dt = grid.steps
    sdt = np.sqrt(dt)
    theta, lam, nu = params.theta, params.lambda_, params.nu
    rho, rho_bar = params.rho, params.rho_bar

    V = np.empty((m, n + 1))
    Y = np.empty((m, n + 1))
    V[:, 0] = params.V0
    Y[:, 0] = math.log(params.S0)
    incr = np.empty((n, m))
    neg_sqrt = 0
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(1, n + 1):
            i = k - 1
            vp = np.maximum(V[:, i], 0.0)
            neg_sqrt += int(np.count_nonzero(vp < 0))
            sv = np.sqrt(vp)
            dW = sdt[i] * Z[:, i]
            dWp = sdt[i] * Zperp[:, i]
            incr[i] = (theta - lam * vp) * dt[i] + nu * sv * dW
            Y[:, k] = Y[:, i] - 0.5 * vp * dt[i] + rho * sv * dW + rho_bar * sv * dWp
            V[:, k] = params.V0 + weights.row(k) @ incr[:k]
    faults = ~(np.isfinite(V).all(axis=1) & np.isfinite(Y).all(axis=1))
    X = _left_riemann(V, dt, clip_variance_in_X)
    return VBatch(grid=grid, Y=Y, V=V, X=X, faults=faults, negative_sqrt_args=neg_sqrt)


def simulate_v_path(params: ModelParams, weights: KernelWeights, stream: IncrementStream,
                    clip_variance_in_X: bool = False) -> VPath:
    if stream.grid != weights.grid:
        raise ValueError("stream and weights are built on different grids")
    batch = simulate_v_batch(params, weights, stream.Z[None, :], stream.Zperp[None, :],
                             clip_variance_in_X)
    if batch.faults[0]:
        bad = np.flatnonzero(~(np.isfinite(batch.V[0]) & np.isfinite(batch.Y[0])))
        raise PathFault("non-finite value in variance path", step=int(bad[0]))
    return batch.path(0)
