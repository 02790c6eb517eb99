"""Time grid, model coefficients and deterministic quadrature.

The controlled state follows the linear dynamics

    dX_s = (a(s) X_s + b(s) u_s + c(s)) ds + (d(s) u_s + f(s)) dW_s

on a finite horizon [0, T].  All five coefficient paths are deterministic
functions of time, given either in closed form (constant, polynomial,
exponential) or as samples with piecewise-linear interpolation.  The control
loading on the diffusion must stay away from zero, which is enforced at
construction through ``d_min``.

Every path exposes an exact antiderivative, so growth factors of the form
exp(int_t^T a) are additive to rounding.  Quadrature of node-sampled paths
uses composite Simpson weights over whole grid cells, a one-sided quadratic
rule when an odd cell is left over, and a linear correction on partial cells
at the interval ends; integrals between grid nodes are exact for quadratic
integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CoefficientError, DomainError, GridMismatchError

_SNAP = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * horizon / num_steps, k = 0..num_steps."""

    horizon: float
    num_steps: int = 512

    def __post_init__(self):
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive and finite, got {self.horizon}")
        if self.num_steps < 2:
            raise DomainError(f"need at least 2 steps, got {self.num_steps}")

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.num_steps + 1)

    @property
    def step(self) -> float:
        return self.horizon / self.num_steps

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.num_steps * factor)

    def require_time(self, t: float) -> float:
        snap = _SNAP * max(1.0, self.horizon)
        if not (-snap <= t <= self.horizon + snap):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        return min(max(t, 0.0), self.horizon)


@dataclass(frozen=True)
class ConstantCoefficient:
    value: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def antiderivative(self, t):
        return self.value * np.asarray(t, dtype=float)

    def integral(self, a: float, b: float) -> float:
        return self.value * (b - a)


@dataclass(frozen=True)
class PolynomialCoefficient:
    """Polynomial in t with ascending coefficients."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise CoefficientError("polynomial coefficient needs at least one term")

    @cached_property
    def _poly(self):
        return np.polynomial.Polynomial(self.coeffs)

    @cached_property
    def _anti(self):
        return self._poly.integ()

    def __call__(self, t):
        return self._poly(np.asarray(t, dtype=float))

    def antiderivative(self, t):
        return self._anti(np.asarray(t, dtype=float))

    def integral(self, a: float, b: float) -> float:
        return float(self._anti(b) - self._anti(a))


@dataclass(frozen=True)
class ExponentialCoefficient:
    """scale * exp(rate * t) + offset."""

    scale: float
    rate: float
    offset: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * np.exp(self.rate * t) + self.offset

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return (self.scale + self.offset) * t
        return self.scale / self.rate * np.exp(self.rate * t) + self.offset * t

    def integral(self, a: float, b: float) -> float:
        return float(self.antiderivative(b) - self.antiderivative(a))


@dataclass(frozen=True)
class SampledCoefficient:
    """Piecewise-linear path through (times, values) samples."""

    times: tuple
    values: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) != len(values):
            raise GridMismatchError(f"{len(times)} sample times vs {len(values)} values")
        if len(times) < 2:
            raise CoefficientError("sampled coefficient needs at least two samples")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise CoefficientError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_grid(cls, grid: TimeGrid, values) -> "SampledCoefficient":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise GridMismatchError(
                f"expected {grid.nodes.size} samples on the grid, got {values.size}"
            )
        return cls(tuple(grid.nodes), tuple(values))

    @cached_property
    def _t(self):
        return np.asarray(self.times)

    @cached_property
    def _v(self):
        return np.asarray(self.values)

    @cached_property
    def _cum(self):
        # exact antiderivative of the piecewise-linear interpolant at sample times
        dt = np.diff(self._t)
        cells = 0.5 * dt * (self._v[:-1] + self._v[1:])
        return np.concatenate([[0.0], np.cumsum(cells)])

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self._t, self._v)

    def antiderivative(self, t):
        x = np.clip(np.asarray(t, dtype=float), self.times[0], self.times[-1])
        k = np.clip(np.searchsorted(self._t, x, side="right") - 1, 0, len(self.times) - 2)
        return self._cum[k] + 0.5 * (x - self._t[k]) * (self._v[k] + self(x))

    def integral(self, a: float, b: float) -> float:
        return float(self.antiderivative(b) - self.antiderivative(a))


def coefficient_nodes(path, grid: TimeGrid) -> np.ndarray:
    """Sample a coefficient path on the grid nodes."""
    return np.asarray(path(grid.nodes), dtype=float)


def _composite_even(v: np.ndarray, h: float, i0: int, i1: int) -> float:
    seg = v[i0 : i1 + 1]
    return (h / 3.0) * (
        seg[0] + seg[-1] + 4.0 * seg[1:-1:2].sum() + 2.0 * seg[2:-1:2].sum()
    )


def _simpson_nodes(v: np.ndarray, h: float, i0: int, i1: int) -> float:
    """Integral over [t_i0, t_i1]; exact for quadratics sampled on the nodes."""
    m = i1 - i0
    if m <= 0:
        return 0.0
    if m == 1:
        # single cell: quadratic through the three nearest nodes
        if i1 + 1 < v.size:
            return h * (5.0 * v[i0] + 8.0 * v[i0 + 1] - v[i0 + 2]) / 12.0
        return h * (-v[i0 - 1] + 8.0 * v[i0] + 5.0 * v[i1]) / 12.0
    if m % 2 == 1:
        tail = h * (-v[i1 - 2] + 8.0 * v[i1 - 1] + 5.0 * v[i1]) / 12.0
        return _composite_even(v, h, i0, i1 - 1) + tail
    return _composite_even(v, h, i0, i1)


def integrate(values, grid: TimeGrid, a: float, b: float) -> float:
    """Integrate a node-sampled path over [a, b] inside [0, horizon]."""
    v = np.asarray(values, dtype=float)
    if v.shape != grid.nodes.shape:
        raise GridMismatchError(f"expected {grid.nodes.size} node values, got {v.size}")
    snap = _SNAP * max(1.0, grid.horizon)
    if not (-snap <= a <= b + snap and b <= grid.horizon + snap):
        raise DomainError(f"bad integration range [{a}, {b}] on [0, {grid.horizon}]")
    a = min(max(a, 0.0), grid.horizon)
    b = min(max(b, a), grid.horizon)
    h = grid.step
    n = grid.num_steps
    i0 = min(max(int(math.ceil((a - snap) / h)), 0), n)
    i1 = min(max(int(math.floor((b + snap) / h)), 0), n)
    if i0 > i1:
        # both endpoints inside one cell
        fa = float(np.interp(a, grid.nodes, v))
        fb = float(np.interp(b, grid.nodes, v))
        return 0.5 * (b - a) * (fa + fb)
    total = _simpson_nodes(v, h, i0, i1)
    t0 = i0 * h
    if a < t0 - snap:
        fa = float(np.interp(a, grid.nodes, v))
        total += 0.5 * (t0 - a) * (fa + v[i0])
    t1 = i1 * h
    if b > t1 + snap:
        fb = float(np.interp(b, grid.nodes, v))
        total += 0.5 * (b - t1) * (v[i1] + fb)
    return float(total)


class SuffixQuadrature:
    """Vectorized evaluation of t -> integrate(values, grid, t, horizon).

    Matches ``integrate`` node for node (same Simpson core, same partial-cell
    correction) but evaluates whole arrays of query times at once.
    """

    def __init__(self, values, grid: TimeGrid):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != grid.nodes.shape:
            raise GridMismatchError(
                f"expected {grid.nodes.size} node values, got {self.values.size}"
            )
        h = grid.step
        self._suffix = np.array(
            [_simpson_nodes(self.values, h, k, grid.num_steps) for k in range(grid.num_steps + 1)]
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        ts = np.atleast_1d(np.clip(t, 0.0, self.grid.horizon))
        h = self.grid.step
        snap = _SNAP * max(1.0, self.grid.horizon)
        i0 = np.clip(np.ceil((ts - snap) / h).astype(int), 0, self.grid.num_steps)
        width = np.maximum(i0 * h - ts, 0.0)
        left = np.interp(ts, self.grid.nodes, self.values)
        out = self._suffix[i0] + 0.5 * width * (left + self.values[i0])
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class CoefficientSet:
    """The five deterministic coefficient paths of the controlled dynamics.

    ``state_drift``, ``control_drift`` and ``drift_offset`` enter the drift as
    a(s) X + b(s) u + c(s); ``control_vol`` and ``vol_offset`` enter the
    diffusion as d(s) u + f(s).
    """

    grid: TimeGrid
    state_drift: object
    control_drift: object
    drift_offset: object
    control_vol: object
    vol_offset: object
    d_min: float = 1e-10

    def __post_init__(self):
        if not (self.d_min > 0.0):
            raise CoefficientError("d_min must be positive")
        snap = _SNAP * max(1.0, self.grid.horizon)
        for path in (
            self.state_drift,
            self.control_drift,
            self.drift_offset,
            self.control_vol,
            self.vol_offset,
        ):
            if isinstance(path, SampledCoefficient):
                if path.times[0] > snap or path.times[-1] < self.grid.horizon - snap:
                    raise CoefficientError(
                        f"sampled path on [{path.times[0]}, {path.times[-1]}] does not "
                        f"cover the horizon [0, {self.grid.horizon}]"
                    )
        probe = np.sort(
            np.concatenate([self.grid.nodes, self.grid.nodes[:-1] + 0.5 * self.grid.step])
        )
        dvals = np.abs(np.asarray(self.control_vol(probe), dtype=float))
        worst = float(dvals.min())
        if worst < self.d_min:
            raise CoefficientError(
                f"control volatility magnitude {worst:.3e} below floor {self.d_min:.3e}"
            )

    @cached_property
    def a_nodes(self) -> np.ndarray:
        return coefficient_nodes(self.state_drift, self.grid)

    @cached_property
    def b_nodes(self) -> np.ndarray:
        return coefficient_nodes(self.control_drift, self.grid)

    @cached_property
    def c_nodes(self) -> np.ndarray:
        return coefficient_nodes(self.drift_offset, self.grid)

    @cached_property
    def d_nodes(self) -> np.ndarray:
        return coefficient_nodes(self.control_vol, self.grid)

    @cached_property
    def f_nodes(self) -> np.ndarray:
        return coefficient_nodes(self.vol_offset, self.grid)

    def int_state_drift(self, t: float) -> float:
        """Exact integral of the state drift coefficient over [t, horizon]."""
        t = self.grid.require_time(t)
        return float(self.state_drift.integral(t, self.grid.horizon))

    @cached_property
    def budget_rate_nodes(self) -> np.ndarray:
        """(b/d)^2 on the nodes, the decay rate of the control budget."""
        return (self.b_nodes / self.d_nodes) ** 2

    @cached_property
    def theta_eval(self) -> SuffixQuadrature:
        return SuffixQuadrature(self.budget_rate_nodes, self.grid)


@dataclass(frozen=True)
class DiscountCache:
    """Node values of the terminal growth factor exp(int_t^T a) and its square.

    The integral of the state drift comes from the coefficient descriptor's
    exact antiderivative, so the cache is additive between nodes and the
    semigroup identity holds to rounding.
    """

    grid: TimeGrid
    int_a: np.ndarray
    growth: np.ndarray
    growth_sq: np.ndarray
    _path: object

    @classmethod
    def from_coeffs(cls, coeffs: CoefficientSet) -> "DiscountCache":
        grid = coeffs.grid
        path = coeffs.state_drift
        end = float(np.asarray(path.antiderivative(grid.horizon)))
        ints = end - np.asarray(path.antiderivative(grid.nodes), dtype=float)
        growth = np.exp(ints)
        return cls(grid, ints, growth, growth * growth, path)

    def int_a_many(self, t):
        t = np.asarray(t, dtype=float)
        end = float(np.asarray(self._path.antiderivative(self.grid.horizon)))
        return end - np.asarray(self._path.antiderivative(t), dtype=float)

    def int_a_at(self, t: float) -> float:
        t = self.grid.require_time(t)
        return float(self.int_a_many(t))

    def growth_many(self, t):
        return np.exp(self.int_a_many(t))

    def growth_at(self, t: float) -> float:
        return math.exp(self.int_a_at(t))

    def growth_sq_at(self, t: float) -> float:
        return math.exp(2.0 * self.int_a_at(t))


def theta(coeffs: CoefficientSet, t: float) -> float:
    """Remaining control budget int_t^T (b(s)/d(s))^2 ds."""
    t = coeffs.grid.require_time(t)
    val = integrate(coeffs.budget_rate_nodes, coeffs.grid, t, coeffs.grid.horizon)
    return max(val, 0.0)


def big_theta(coeffs: CoefficientSet, t: float, x: float, cache: DiscountCache | None = None) -> float:
    """Conditional terminal mean of the state when the control only offsets risk.

    Equals x * exp(int_t^T a) plus the accumulated drift offset
    int_t^T exp(int_s^T a) (c(s) - b(s) f(s) / d(s)) ds.
    """
    t = coeffs.grid.require_time(t)
    cache = cache or DiscountCache.from_coeffs(coeffs)
    integrand = cache.growth * (
        coeffs.c_nodes - coeffs.b_nodes * coeffs.f_nodes / coeffs.d_nodes
    )
    drift = integrate(integrand, coeffs.grid, t, coeffs.grid.horizon)
    return x * cache.growth_at(t) + drift


def y_from_beta(coeffs: CoefficientSet, beta, t: float) -> float:
    """Terminal variance int_t^T (d(s) beta(s))^2 ds of the feedback loading."""
    t = coeffs.grid.require_time(t)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != coeffs.grid.nodes.shape:
        raise GridMismatchError(
            f"beta path has {beta.size} samples, grid has {coeffs.grid.nodes.size} nodes"
        )
    val = integrate((coeffs.d_nodes * beta) ** 2, coeffs.grid, t, coeffs.grid.horizon)
    return max(val, 0.0)
