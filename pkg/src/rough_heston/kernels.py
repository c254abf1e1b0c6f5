"""Volterra kernels, discrete convolution weights and regularity checks.

A kernel is a nonnegative, non-increasing function on (0, inf), possibly
singular at the origin. Every variant exposes its value, its first primitive
``K1(t) = int_0^t K`` and its second primitive ``K2(t) = int_0^t K1``. The
primitives are what product-integration solvers need; they are closed form
where possible and fall back to adaptive quadrature otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .grid import TimeGrid

__all__ = [
    "Kernel",
    "FractionalPowerLaw",
    "ExponentiallyDamped",
    "LogKernel",
    "SumKernel",
    "ProductKernel",
    "KernelWeights",
    "ResolventFirstKind",
    "RegularityReport",
    "evaluate",
    "precompute_weights",
    "exact_linear_drift_convolution",
    "power_law_resolvent",
    "verify_regularity",
    "kernel_from_spec",
]

_QUAD_EPSABS = 1e-10


def _check_positive_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("kernel evaluated at t <= 0 (the kernel may be singular at the origin)")
    return arr


def _quad_primitive(func, t: float) -> float:
    # Subdivide geometrically towards 0 so QUADPACK sees the singularity early.
    if t <= 0:
        return 0.0
    points = [t * 2.0 ** (-j) for j in range(30, 0, -1)]
    val, _ = integrate.quad(func, 0.0, t, points=points, limit=400,
                            epsabs=_QUAD_EPSABS, epsrel=1e-12)
    return val


class Kernel:
    """Base class. Subclasses implement ``_value`` for positive times."""

    hurst_exponent: float

    def _value(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, t):
        arr = _check_positive_time(t)
        out = self._value(arr)
        return float(out) if np.ndim(out) == 0 else out

    def integrated(self, t):
        """First primitive ``int_0^t K(s) ds``."""
        return self._vectorise(self._integrated_scalar, t)

    def double_integrated(self, t):
        """Second primitive ``int_0^t int_0^r K(s) ds dr``."""
        return self._vectorise(self._double_integrated_scalar, t)

    def _integrated_scalar(self, t: float) -> float:
        return _quad_primitive(lambda s: float(self._value(np.asarray(s))), t)

    def _double_integrated_scalar(self, t: float) -> float:
        # int_0^t K1(r) dr = int_0^t (t - s) K(s) ds
        return _quad_primitive(lambda s: (t - s) * float(self._value(np.asarray(s))), t)

    @staticmethod
    def _vectorise(fn, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise ValueError("kernel primitives are defined for t >= 0")
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(x)) for x in arr.ravel()]).reshape(arr.shape)

    def __add__(self, other: "Kernel") -> "SumKernel":
        return SumKernel((self, other))

    def __mul__(self, other: "Kernel") -> "ProductKernel":
        return ProductKernel(self, other)


@dataclass(frozen=True, eq=True)
class FractionalPowerLaw(Kernel):
    """``K(t) = c * t**(H - 1/2)``."""

    c: float
    H: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("power-law kernel needs c > 0")
        if not 0 < self.H <= 0.5:
            raise ValueError("power-law kernel needs H in (0, 1/2]")

    @classmethod
    def gamma_normalized(cls, H: float) -> "FractionalPowerLaw":
        """The fractional kernel ``t**(H-1/2) / Gamma(H+1/2)``."""
        return cls(c=1.0 / math.gamma(H + 0.5), H=H)

    @property
    def hurst_exponent(self) -> float:
        return self.H

    @property
    def alpha(self) -> float:
        return self.H + 0.5

    def _value(self, t):
        return self.c * t ** (self.H - 0.5)

    def integrated(self, t):
        t = np.asarray(t, dtype=float)
        a = self.alpha
        out = self.c * t ** a / a
        return float(out) if out.ndim == 0 else out

    def double_integrated(self, t):
        t = np.asarray(t, dtype=float)
        a = self.alpha
        out = self.c * t ** (a + 1.0) / (a * (a + 1.0))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=True)
class ExponentiallyDamped(Kernel):
    """``K(t) = c * exp(-beta t) * t**(H - 1/2)``."""

    c: float
    beta: float
    H: float

    def __post_init__(self):
        if not self.c > 0 or self.beta < 0:
            raise ValueError("damped kernel needs c > 0 and beta >= 0")
        if not 0 < self.H <= 0.5:
            raise ValueError("damped kernel needs H in (0, 1/2]")

    @property
    def hurst_exponent(self) -> float:
        return self.H

    def _value(self, t):
        return self.c * np.exp(-self.beta * t) * t ** (self.H - 0.5)

    def _lower_gamma(self, a: float, t):
        # int_0^t s**(a-1) exp(-beta s) ds
        if self.beta == 0:
            return t ** a / a
        return special.gammainc(a, self.beta * t) * special.gamma(a) / self.beta ** a

    def integrated(self, t):
        t = np.asarray(t, dtype=float)
        out = self.c * self._lower_gamma(self.H + 0.5, t)
        return float(out) if out.ndim == 0 else out

    def double_integrated(self, t):
        t = np.asarray(t, dtype=float)
        a = self.H + 0.5
        out = self.c * (t * self._lower_gamma(a, t) - self._lower_gamma(a + 1.0, t))
        return float(out) if out.ndim == 0 else out


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


@dataclass(frozen=True, eq=True)
class LogKernel(Kernel):
    """``K(t) = log(1 + 1/(t+1))``; bounded, hence Lipschitz-regular."""

    hurst_exponent: float = 0.5

    def _value(self, t):
        return np.log1p(1.0 / (t + 1.0))

    def integrated(self, t):
        t = np.asarray(t, dtype=float)
        out = _xlogx(t + 2.0) - _xlogx(t + 1.0) - 2.0 * math.log(2.0)
        return float(out) if out.ndim == 0 else out

    def double_integrated(self, t):
        t = np.asarray(t, dtype=float)

        def prim(x):  # antiderivative of x log x
            return 0.5 * x * x * np.log(x) - 0.25 * x * x

        out = (prim(t + 2.0) - prim(2.0)) - (prim(t + 1.0) - prim(1.0)) - 2.0 * math.log(2.0) * t
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=True)
class SumKernel(Kernel):
    parts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("SumKernel needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def hurst_exponent(self) -> float:
        return min(p.hurst_exponent for p in self.parts)

    def _value(self, t):
        return sum(p._value(t) for p in self.parts)

    def integrated(self, t):
        return sum(p.integrated(t) for p in self.parts)

    def double_integrated(self, t):
        return sum(p.double_integrated(t) for p in self.parts)


@dataclass(frozen=True, eq=True)
class ProductKernel(Kernel):
    left: Kernel
    right: Kernel

    @property
    def hurst_exponent(self) -> float:
        return min(self.left.hurst_exponent, self.right.hurst_exponent)

    def _value(self, t):
        return self.left._value(t) * self.right._value(t)


def evaluate(kernel: Kernel, t):
    """Evaluate ``kernel`` at ``t > 0``; raises ``ValueError`` otherwise."""
    return kernel(t)


# ---------------------------------------------------------------------------
# discrete weights


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Lower-triangular table ``w[k][i] = K(t_k - t_i)`` for ``0 <= i < k <= n``.

    On a uniform grid only the lag ``k - i`` matters and ``lags[d] = K(d h)``
    is stored instead of the dense table (``lags[0]`` is unused and NaN).
    """

    grid: TimeGrid
    lags: np.ndarray | None = None
    dense: np.ndarray | None = None

    def __post_init__(self):
        if self.lags is not None:
            self.lags.setflags(write=False)
            object.__setattr__(self, "_rev", self.lags[::-1].copy())
        if self.dense is not None:
            self.dense.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def row(self, k: int) -> np.ndarray:
        """Weights ``w[k][0..k-1]`` as a contiguous array."""
        if not 1 <= k <= self.n:
            raise IndexError(k)
        if self.lags is not None:
            n = self.n
            return self._rev[n - k:n]
        return self.dense[k, :k]

    def __getitem__(self, idx) -> float:
        k, i = idx
        if not 0 <= i < k <= self.n:
            raise IndexError(idx)
        if self.lags is not None:
            return float(self.lags[k - i])
        return float(self.dense[k, i])

    def matrix(self) -> np.ndarray:
        """Dense ``(n+1, n+1)`` table with zeros on and above the diagonal."""
        n = self.n
        out = np.zeros((n + 1, n + 1))
        for k in range(1, n + 1):
            out[k, :k] = self.row(k)
        return out


def precompute_weights(kernel: Kernel, grid: TimeGrid) -> KernelWeights:
    if grid.n < 1:
        raise ValueError("grid must have at least one step")
    if grid.is_uniform:
        lags = np.full(grid.n + 1, np.nan)
        lags[1:] = kernel(np.arange(1, grid.n + 1) * grid.T / grid.n)
        return KernelWeights(grid=grid, lags=lags)
    t = grid.nodes
    dense = np.zeros((grid.n + 1, grid.n + 1))
    for k in range(1, grid.n + 1):
        dense[k, :k] = kernel(t[k] - t[:k])
    return KernelWeights(grid=grid, dense=dense)


def exact_linear_drift_convolution(kernel: Kernel, theta: float, t):
    """``int_0^t K(t - s) * theta * s ds``, which equals ``theta * K2(t)``.

    For the power law this is ``theta * c * t**(H+3/2) * B(2, H+1/2)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if theta == 0:
        out = np.zeros_like(t)
    elif isinstance(kernel, FractionalPowerLaw):
        a = kernel.alpha
        with np.errstate(over="ignore", invalid="ignore"):  # overflow surfaces as a path fault
            out = theta * kernel.c * t ** (a + 1.0) * special.beta(2.0, a)
    else:
        out = theta * np.asarray(kernel.double_integrated(t), dtype=float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# resolvent of the first kind


@dataclass(frozen=True)
class ResolventFirstKind:
    """Density ``L(dt) = C_H t**(-(H+1/2)) dt`` of a power-law kernel's resolvent."""

    kernel: FractionalPowerLaw
    normalizing_constant: float

    def density(self, t):
        t = _check_positive_time(t)
        return self.normalizing_constant * t ** (-(self.kernel.H + 0.5))

    def convolve_with_kernel(self, t: float) -> float:
        """Quadrature of ``int_0^t K(t-s) L(ds)``; identically 1 in exact arithmetic."""
        H = self.kernel.H
        # weight='alg' integrates (s-0)**a (t-s)**b exactly against the smooth factor
        val, _ = integrate.quad(lambda s: 1.0, 0.0, t, weight="alg",
                                wvar=(-(H + 0.5), H - 0.5), epsabs=1e-13)
        return self.kernel.c * self.normalizing_constant * val


def power_law_resolvent(kernel: FractionalPowerLaw) -> ResolventFirstKind:
    if not isinstance(kernel, FractionalPowerLaw):
        raise TypeError("closed-form resolvent is only available for FractionalPowerLaw")
    H = kernel.H
    if H >= 0.5:
        raise ValueError("H = 1/2 gives a constant kernel whose resolvent is a point mass")
    # int_0^t (t-s)**(H-1/2) s**(-H-1/2) ds = B(H+1/2, 1/2-H), independent of t
    const = 1.0 / (kernel.c * special.beta(H + 0.5, 0.5 - H))
    return ResolventFirstKind(kernel=kernel, normalizing_constant=const)


# ---------------------------------------------------------------------------
# regularity conditions


@dataclass
class RegularityReport:
    exponent: float
    deltas: np.ndarray
    grid_sizes: list
    a2_ratios: np.ndarray  # shape (len(grid_sizes), len(deltas)), sup over t
    a3_ratios: np.ndarray
    sup_a2: float
    sup_a3: float
    bounded: bool

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "deltas": self.deltas.tolist(),
            "grid_sizes": list(self.grid_sizes),
            "a2_ratios": self.a2_ratios.tolist(),
            "a3_ratios": self.a3_ratios.tolist(),
            "sup_a2": self.sup_a2,
            "sup_a3": self.sup_a3,
            "bounded": self.bounded,
        }


def _cell_overlaps(nodes: np.ndarray, a: float, b: float):
    """Left endpoints and overlap lengths of grid cells meeting [a, b)."""
    left = nodes[:-1]
    right = nodes[1:]
    lo = np.maximum(left, a)
    hi = np.minimum(right, b)
    mask = hi > lo
    return left[mask], (hi - lo)[mask]


def _a2_lhs(kernel: Kernel, nodes: np.ndarray, t: float, delta: float) -> float:
    # integrand is constant on each grid cell, so the integral is a finite sum
    eta, length = _cell_overlaps(nodes, t, t + delta)
    return float(np.sum(length * kernel(t + delta - eta) ** 2))


def _a3_lhs(kernel: Kernel, nodes: np.ndarray, t: float, delta: float) -> float:
    if t <= 0:
        return 0.0
    eta, length = _cell_overlaps(nodes, 0.0, t)
    diff = kernel(t + delta - eta) - kernel(t - eta)
    return float(np.sum(length * diff ** 2))


def verify_regularity(kernel: Kernel, grid: TimeGrid, H: float, *,
                      deltas: Sequence[float] | None = None,
                      refinements: int = 3,
                      num_t: int = 9,
                      contraction: float = 0.98) -> RegularityReport:
    """Empirical sup of ``LHS / delta**(2H)`` for the two kernel conditions.

    The left-hand sides are evaluated exactly on ``grid`` and on ``refinements``
    successive 2x refinements of it, over a lattice of anchors ``t`` and dyadic
    ``delta``. ``bounded`` is False when the sup keeps growing under refinement
    or as ``delta`` shrinks, which is how divergence is reported.

    For rough kernels the grid error decays only like ``h**(2H)``, so the sups
    still creep upwards at the finest level. Growth under refinement is accepted
    as long as consecutive increments shrink by at least ``contraction``, i.e.
    the sequence behaves like a convergent geometric tail.
    """
    if not H > 0:
        raise ValueError("H must be positive")
    T = grid.T
    if deltas is None:
        deltas = [T * 2.0 ** (-k) for k in range(1, 9)]
    deltas = np.asarray(deltas, dtype=float)
    sizes = [grid.n * 2 ** r for r in range(refinements + 1)]
    a2 = np.zeros((len(sizes), len(deltas)))
    a3 = np.zeros_like(a2)
    for gi, n in enumerate(sizes):
        nodes = grid.nodes if gi == 0 else grid.refine(2 ** gi).nodes
        for di, d in enumerate(deltas):
            anchors = np.linspace(0.0, T - d, num_t)
            scale = d ** (2.0 * H)
            a2[gi, di] = max(_a2_lhs(kernel, nodes, t, d) for t in anchors) / scale
            a3[gi, di] = max(_a3_lhs(kernel, nodes, t, d) for t in anchors) / scale
    sup2 = float(a2.max())
    sup3 = float(a3.max())

    def _stable(r: np.ndarray) -> bool:
        if not np.all(np.isfinite(r)):
            return False
        if not np.any(r > 0):
            return True
        level_sup = r.max(axis=1)
        inc = np.diff(level_sup)
        if len(inc) >= 2 and inc[-1] > 0 and inc[-1] > contraction * inc[-2]:
            return False
        # the sup ratio must not blow up as delta -> 0
        sup = r.max(axis=0)
        keep = sup > 0
        if keep.sum() < 2:
            return True
        slope = np.polyfit(np.log(deltas[keep]), np.log(sup[keep]), 1)[0]
        return bool(slope >= -0.05)

    bounded = _stable(a2) and _stable(a3)
    return RegularityReport(exponent=H, deltas=deltas, grid_sizes=sizes,
                            a2_ratios=a2, a3_ratios=a3, sup_a2=sup2, sup_a3=sup3,
                            bounded=bounded)


# ---------------------------------------------------------------------------
# config specs


def kernel_from_spec(spec: dict) -> Kernel:
    """Build a kernel from a tagged mapping such as
    ``{"type": "power_law", "c": "gamma_normalized", "H": 0.1}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("kernel spec must be a mapping with a 'type' field")
    kind = spec["type"]
    if kind == "power_law":
        H = float(spec["H"])
        c = spec.get("c", "gamma_normalized")
        c = 1.0 / math.gamma(H + 0.5) if c == "gamma_normalized" else float(c)
        return FractionalPowerLaw(c=c, H=H)
    if kind == "exp_damped":
        H = float(spec["H"])
        c = spec.get("c", 1.0)
        c = 1.0 / math.gamma(H + 0.5) if c == "gamma_normalized" else float(c)
        return ExponentiallyDamped(c=c, beta=float(spec.get("beta", 0.0)), H=H)
    if kind == "log":
        return LogKernel()
    if kind == "sum":
        return SumKernel(tuple(kernel_from_spec(p) for p in spec["parts"]))
    if kind == "product":
        left, right = spec["parts"]
        return ProductKernel(kernel_from_spec(left), kernel_from_spec(right))
    raise ValueError(f"unknown kernel type {kind!r}")
