"""Central-moment bookkeeping and Gaussian closed forms.

A centred Gaussian with variance y has central moments
alpha(j, y) = (j-1)!! y^(j/2) for even j and zero for odd j.  Penalty-style
objectives measure risk through the expectation of an even convex shape of
the centred terminal state; for Gaussian laws those expectations collapse to
the closed forms implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ObjectiveError, QuadratureError

_MAX_EXACT_DOUBLE_FACTORIAL = 33  # 35!! no longer fits in 64 bits


def double_factorial(k: int):
    """k!! with the empty-product convention (-1)!! = 0!! = 1.

    Exact integer up to k = 33, floating point beyond.
    """
    k = int(k)
    if k < -1:
        raise DomainError(f"double factorial undefined for {k}")
    if k <= 0:
        return 1
    if k <= _MAX_EXACT_DOUBLE_FACTORIAL:
        return math.prod(range(k, 0, -2))
    out = 1.0
    while k > 1:
        out *= k
        k -= 2
    return out


def alpha(j: int, y: float) -> float:
    """Central moment of order j of a centred Gaussian with variance y."""
    j = int(j)
    if j < 0:
        raise DomainError(f"moment order must be nonnegative, got {j}")
    if y < 0.0:
        raise DomainError(f"variance must be nonnegative, got {y}")
    if j % 2 == 1:
        return 0.0
    return float(double_factorial(j - 1)) * y ** (j // 2)


@dataclass(frozen=True)
class MomentVector:
    """Mean and central moments of orders 2..order of a terminal law.

    ``gaussian_y`` tags vectors whose central moments are those of a centred
    Gaussian with that variance; objective evaluation can then use exact
    closed forms instead of truncated series.
    """

    order: int
    mean: float
    central: tuple
    gaussian_y: float | None = None

    def __post_init__(self):
        if self.order < 1:
            raise DomainError(f"order must be at least 1, got {self.order}")
        central = tuple(float(v) for v in self.central)
        object.__setattr__(self, "central", central)
        if len(central) != self.order - 1:
            raise DomainError(
                f"need {self.order - 1} central moments for order {self.order}, got {len(central)}"
            )
        if self.order >= 2 and central[0] < 0.0:
            raise DomainError(f"variance must be nonnegative, got {central[0]}")
        if self.gaussian_y is not None and self.gaussian_y < 0.0:
            raise DomainError(f"gaussian variance tag must be nonnegative, got {self.gaussian_y}")

    @classmethod
    def gaussian(cls, order: int, y: float, mean: float = 0.0) -> "MomentVector":
        central = tuple(alpha(j, y) for j in range(2, order + 1))
        return cls(order, mean, central, gaussian_y=y)

    def central_moment(self, j: int) -> float:
        if j == 0:
            return 1.0
        if j == 1:
            return 0.0
        if not 2 <= j <= self.order:
            raise DomainError(f"central moment order {j} outside 2..{self.order}")
        return self.central[j - 2]

    def untagged(self, central=None) -> "MomentVector":
        return MomentVector(self.order, self.mean, central or self.central)


def central_to_raw(mv: MomentVector) -> tuple:
    """Raw moments of orders 1..order about zero."""
    raw = []
    for i in range(1, mv.order + 1):
        total = 0.0
        for k in range(0, i + 1):
            total += math.comb(i, k) * mv.mean ** (i - k) * mv.central_moment(k)
        raw.append(total)
    return tuple(raw)


def raw_to_central(raw) -> MomentVector:
    """Rebuild a MomentVector from raw moments of orders 1..n."""
    raw = tuple(float(v) for v in raw)
    if not raw:
        raise DomainError("need at least the first raw moment")
    n = len(raw)
    mean = raw[0]
    full = (1.0,) + raw
    central = []
    for j in range(2, n + 1):
        total = 0.0
        for k in range(0, j + 1):
            total += math.comb(j, k) * (-mean) ** (j - k) * full[k]
        central.append(total)
    if central and central[0] < 0.0 and central[0] > -1e-12 * max(1.0, mean * mean):
        central[0] = 0.0  # rounding guard for degenerate laws
    return MomentVector(n, mean, tuple(central))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite discrete law for an amplitude factor, values with probabilities."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) != len(probs) or not values:
            raise ObjectiveError("amplitude law needs matching nonempty values and probs")
        if any(p < 0.0 for p in probs):
            raise ObjectiveError("amplitude probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ObjectiveError(f"amplitude probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @cached_property
    def _v(self):
        return np.asarray(self.values)

    @cached_property
    def _p(self):
        return np.asarray(self.probs)

    def moment(self, k: int) -> float:
        return float(np.sum(self._p * self._v**k))

    def mean_exp_sq(self, z: float, weight_power: int = 0) -> float:
        """E[H^weight_power * exp(-H^2 z / 2)]."""
        return float(np.sum(self._p * self._v**weight_power * np.exp(-0.5 * self._v**2 * z)))


def _fourier_quadrature(freqs: np.ndarray, weights: np.ndarray) -> float:
    if freqs.size < 3:
        raise QuadratureError("need at least 3 frequency samples")
    if np.any(np.diff(freqs) <= 0.0):
        raise QuadratureError("frequency samples must be strictly increasing")
    scale = float(np.max(np.abs(weights)))
    if scale > 0.0:
        edge = max(abs(float(weights[0])), abs(float(weights[-1])))
        if edge > 1e-6 * scale:
            raise QuadratureError(
                "frequency-domain integrand has not decayed at the truncation window"
            )
    return float(np.trapezoid(weights, freqs))


def gaussian_penalty_expectation(penalty, variance: float) -> float:
    """E[S(Z)] for the penalty shape S and Z centred Gaussian with this variance.

    ``penalty`` is any object exposing ``kind`` plus the shape parameters:
    exp / cosh / cos carry ``c``; ambiguous_cos carries ``amplitude`` (a
    DiscreteDistribution); fourier_even carries ``freqs``, ``density`` (the
    frequency-domain weight including the 1/2pi factor) and ``atom`` at zero.
    """
    if variance < 0.0:
        raise DomainError(f"variance must be nonnegative, got {variance}")
    kind = penalty.kind
    if kind in ("exp", "cosh"):
        c = penalty.c
        return math.expm1(0.5 * c * c * variance) / c
    if kind == "cos":
        c = penalty.c
        return -math.expm1(-0.5 * c * c * variance) / c
    if kind == "ambiguous_cos":
        return 1.0 - penalty.amplitude.mean_exp_sq(variance)
    if kind == "fourier_even":
        freqs = np.asarray(penalty.freqs, dtype=float)
        density = np.asarray(penalty.density, dtype=float)
        if freqs.shape != density.shape:
            raise QuadratureError("frequency grid and density have different lengths")
        weights = density * np.exp(-0.5 * freqs * freqs * variance)
        return penalty.atom + _fourier_quadrature(freqs, weights)
    raise ObjectiveError(f"unknown penalty kind {kind!r}")
