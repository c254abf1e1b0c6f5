"""Monte-Carlo pricing on top of the two Euler schemes.

Paths are simulated in fixed-size chunks. Chunk ``c`` always covers paths
``c*chunk_size .. (c+1)*chunk_size - 1`` and each path draws from its own
keyed stream, so the payoff sample vector, and hence every reported number,
is the same whatever the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import make_uniform_grid, sample_normal_block
from .kernels import Kernel, precompute_weights
from .model import ModelParams
from .payoffs import Payoff
from .scheme_v import simulate_v_batch
from .scheme_x import simulate_x_batch, theta_drift

__all__ = [
    "SCHEMES",
    "McConfig",
    "McEstimate",
    "SimulationFault",
    "TableRow",
    "summarize",
    "simulate_payoffs",
    "price",
    "price_many",
    "convergence_table",
    "table_to_csv",
    "table_to_json",
]

SCHEMES = ("volterra", "integrated")
TABLE_COLUMNS = ("scheme", "n", "mean", "stat_error", "ci_low", "ci_high", "wall_time_seconds")


class SimulationFault(RuntimeError):
    """Raised when one or more paths produced non-finite values."""

    def __init__(self, fault_count: int, num_paths: int):
        super().__init__(f"{fault_count} of {num_paths} paths produced non-finite values")
        self.fault_count = fault_count
        self.num_paths = num_paths


@dataclass(frozen=True)
class McConfig:
    num_paths: int = 100_000
    master_seed: int = 0
    scheme: str = "integrated"
    n: int = 320
    worker_count: int | str = 1
    exact_theta_drift: bool = True
    clip_variance_in_X: bool = False
    chunk_size: int = 1024

    def __post_init__(self):
        if int(self.num_paths) != self.num_paths or self.num_paths < 2:
            raise ValueError("num_paths must be an integer >= 2")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.worker_count != "auto" and (int(self.worker_count) != self.worker_count
                                            or self.worker_count < 1):
            raise ValueError("worker_count must be a positive integer or 'auto'")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")

    @property
    def workers(self) -> int:
        if self.worker_count == "auto":
            return os.cpu_count() or 1
        return int(self.worker_count)

    def replace(self, **changes) -> "McConfig":
        d = asdict(self)
        d.update(changes)
        return McConfig(**d)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stat_error: float
    ci_low: float
    ci_high: float
    num_paths: int
    wall_time_seconds: float
    fault_count: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def numbers(self) -> tuple:
        """The estimate without the timing, for reproducibility comparisons."""
        return (self.mean, self.stat_error, self.ci_low, self.ci_high, self.num_paths,
                self.fault_count)


def summarize(samples) -> tuple[float, float]:
    """Sample mean and ``sqrt(population variance / M)``.

    The variance is the 1/M empirical variance, evaluated as the mean squared
    deviation (algebraically equal to ``mean(f**2) - mean(f)**2``). Sums are
    numpy's pairwise sums over a fixed-order array.
    """
    f = np.ascontiguousarray(samples, dtype=float)
    m = f.size
    if m < 2:
        raise ValueError("need at least two samples")
    if f.min() == f.max():
        # constant samples: the rounded sum/m need not equal the common value
        return float(f[0]), 0.0
    mean = float(np.sum(f) / m)
    dev = f - mean
    var = float(np.sum(dev * dev) / m)
    return mean, math.sqrt(var / m)


def _estimate(samples: np.ndarray, wall: float, faults: int) -> McEstimate:
    mean, err = summarize(samples)
    return McEstimate(mean=mean, stat_error=err, ci_low=mean - 2.0 * err,
                      ci_high=mean + 2.0 * err, num_paths=int(samples.size),
                      wall_time_seconds=wall, fault_count=faults)


@lru_cache(maxsize=32)
def _setup(kernel: Kernel, n: int, T: float, theta: float, exact: bool):
    grid = make_uniform_grid(n, T)
    weights = precompute_weights(kernel, grid)
    drift = theta_drift(kernel, weights, theta, exact)
    return grid, weights, drift


def _run_chunk(args) -> tuple[np.ndarray, int]:
    params, kernel, payoffs, cfg, start, count = args
    grid, weights, drift = _setup(kernel, cfg.n, params.T, params.theta, cfg.exact_theta_drift)
    Z, Zp = sample_normal_block(cfg.master_seed, start, count, cfg.n)
    if cfg.scheme == "volterra":
        batch = simulate_v_batch(params, weights, Z, Zp, cfg.clip_variance_in_X)
        X = batch.X
    else:
        batch = simulate_x_batch(params, weights, kernel, Z, Zp, drift=drift)
        X = batch.X
    S = batch.S
    out = np.empty((len(payoffs), count))
    for j, p in enumerate(payoffs):
        out[j] = p(S, X, grid)
    return out, int(np.count_nonzero(batch.faults))


def simulate_payoffs(params: ModelParams, kernel: Kernel, payoffs: Sequence[Payoff],
                     cfg: McConfig) -> tuple[np.ndarray, int, float]:
    """Payoff samples of shape ``(len(payoffs), M)``, fault count and wall time."""
    M = int(cfg.num_paths)
    tasks = [(params, kernel, tuple(payoffs), cfg, s, min(cfg.chunk_size, M - s))
             for s in range(0, M, cfg.chunk_size)]
    t0 = time.perf_counter()
    if cfg.workers == 1 or len(tasks) == 1:
        results = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_chunk, tasks))
    samples = np.concatenate([r[0] for r in results], axis=1)
    faults = sum(r[1] for r in results)
    wall = time.perf_counter() - t0
    return samples, faults, wall


def price_many(params: ModelParams, kernel: Kernel, payoffs: Sequence[Payoff],
               cfg: McConfig) -> list[McEstimate]:
    """Price several payoffs on one common set of simulated paths."""
    samples, faults, wall = simulate_payoffs(params, kernel, payoffs, cfg)
    if faults:
        raise SimulationFault(faults, cfg.num_paths)
    return [_estimate(row, wall, faults) for row in samples]


def price(params: ModelParams, kernel: Kernel, payoff: Payoff, cfg: McConfig) -> McEstimate:
    return price_many(params, kernel, [payoff], cfg)[0]


@dataclass(frozen=True)
class TableRow:
    scheme: str
    n: int
    mean: float
    stat_error: float
    ci_low: float
    ci_high: float
    wall_time_seconds: float

    def as_dict(self) -> dict:
        return asdict(self)


def convergence_table(params: ModelParams, kernel: Kernel, payoff: Payoff,
                      n_list: Sequence[int], M: int, seed: int = 0,
                      schemes: Sequence[str] = SCHEMES, worker_count: int | str = 1,
                      **cfg_kwargs) -> list[TableRow]:
    """One row per (scheme, n), schemes in the order given."""
    if len(n_list) == 0:
        raise ValueError("n_list must not be empty")
    rows = []
    for scheme in schemes:
        for n in n_list:
            cfg = McConfig(num_paths=M, master_seed=seed, scheme=scheme, n=int(n),
                           worker_count=worker_count, **cfg_kwargs)
            est = price(params, kernel, payoff, cfg)
            rows.append(TableRow(scheme=scheme, n=int(n), mean=est.mean,
                                 stat_error=est.stat_error, ci_low=est.ci_low,
                                 ci_high=est.ci_high,
                                 wall_time_seconds=est.wall_time_seconds))
    return rows


def table_to_csv(rows: Sequence[TableRow], reference: float | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    if reference is not None:
        writer.writerow(["reference", "", repr(float(reference)), "", "", "", ""])
    for r in rows:
        writer.writerow([r.scheme, r.n, repr(r.mean), repr(r.stat_error), repr(r.ci_low),
                         repr(r.ci_high), repr(r.wall_time_seconds)])
    return buf.getvalue()


def table_to_json(rows: Sequence[TableRow], reference: float | None = None) -> str:
    doc: dict = {"columns": list(TABLE_COLUMNS), "rows": [r.as_dict() for r in rows]}
    if reference is not None:
        doc["reference"] = float(reference)
    return json.dumps(doc, indent=2, sort_keys=True)
