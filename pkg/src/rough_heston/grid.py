"""Time grids and reproducible Gaussian increments.

Every path owns its own counter-based Philox stream keyed by ``(master_seed,
path_index)``, so a path's noise does not depend on how paths are batched or
distributed over workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "IncrementStream",
    "make_uniform_grid",
    "make_grid",
    "sample_increments",
    "sample_normal_block",
    "path_generator",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Partition ``0 = t_0 < ... < t_n = T``."""

    nodes: np.ndarray
    is_uniform: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.size - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        """``steps[k-1] = t_k - t_{k-1}`` for ``k = 1..n``."""
        return np.diff(self.nodes)

    @property
    def mesh(self) -> float:
        return float(self.steps.max())

    def eta(self, s):
        """Left-endpoint map: the largest node ``<= s``, with ``eta(T) = T``."""
        s_arr = np.asarray(s, dtype=float)
        if np.any((s_arr < 0) | (s_arr > self.T)):
            raise ValueError("eta is defined on [0, T]")
        idx = np.searchsorted(self.nodes, s_arr, side="right") - 1
        out = self.nodes[np.minimum(idx, self.n)]
        return float(out) if out.ndim == 0 else out

    def refine(self, factor: int) -> "TimeGrid":
        """Split every cell into ``factor`` equal pieces."""
        if factor == 1:
            return self
        if self.is_uniform:
            return make_uniform_grid(self.n * factor, self.T)
        frac = np.arange(factor) / factor
        inner = (self.nodes[:-1, None] + np.outer(self.steps, frac)).ravel()
        return TimeGrid(np.append(inner, self.T))

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())


def make_uniform_grid(n: int, T: float) -> TimeGrid:
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not T > 0:
        raise ValueError("T must be positive")
    n = int(n)
    # k*T/n per node rather than accumulating T/n
    nodes = np.array([k * T / n for k in range(n + 1)], dtype=float)
    return TimeGrid(nodes, is_uniform=True)


def make_grid(nodes) -> TimeGrid:
    return TimeGrid(np.asarray(nodes, dtype=float))


_MASK64 = (1 << 64) - 1


def path_generator(master_seed: int, path_index: int) -> np.random.Generator:
    """Philox generator whose 128-bit key is ``(master_seed, path_index)``."""
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    key = np.array([int(master_seed) & _MASK64, int(path_index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class IncrementStream:
    """Gaussian drivers of one path.

    ``Z`` and ``Zperp`` are independent unit normals of length ``n``;
    ``dW[k-1]`` and ``dWperp[k-1]`` are the Brownian increments over
    ``[t_{k-1}, t_k]``.
    """

    master_seed: int
    path_index: int
    grid: TimeGrid
    Z: np.ndarray
    Zperp: np.ndarray

    @property
    def dW(self) -> np.ndarray:
        return np.sqrt(self.grid.steps) * self.Z

    @property
    def dWperp(self) -> np.ndarray:
        return np.sqrt(self.grid.steps) * self.Zperp


def _draw(master_seed: int, path_index: int, n: int) -> np.ndarray:
    # one (n, 2) draw per path, column 0 -> W, column 1 -> W-perp
    return path_generator(master_seed, path_index).standard_normal((n, 2))


def sample_increments(master_seed: int, path_index: int, grid: TimeGrid) -> IncrementStream:
    z = _draw(master_seed, path_index, grid.n)
    return IncrementStream(master_seed=int(master_seed), path_index=int(path_index),
                           grid=grid, Z=z[:, 0].copy(), Zperp=z[:, 1].copy())


def sample_normal_block(master_seed: int, first_path: int, num_paths: int, n: int):
    """Unit normals for paths ``first_path .. first_path+num_paths-1``.

    Returns ``(Z, Zperp)``, each of shape ``(num_paths, n)``; row ``j`` is
    bit-identical to ``sample_increments(master_seed, first_path + j, ...)``.
    """
    Z = np.empty((num_paths, n))
    Zp = np.empty((num_paths, n))
    for j in range(num_paths):
        z = _draw(master_seed, first_path + j, n)
        Z[j] = z[:, 0]
        Zp[j] = z[:, 1]
    return Z, Zp
