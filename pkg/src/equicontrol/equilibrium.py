"""Time-consistent equilibrium controls for the linear moment problem.

The equilibrium feedback control is state-independent:

    u(t, x) = beta(t) exp(-int_t^T a) - f(t) / d(t)

where the loading beta solves the pointwise condition

    kappa b(t) / d(t)^2 + 2 beta(t) K(t, y(t)) = 0,

K is the even-moment curvature of the objective and y(t) = int_t^T (d beta)^2
is the terminal variance produced by the feedback itself.  Eliminating beta
gives a scalar backward equation for y alone,

    y'(t) + (kappa b(t) / d(t))^2 f(t, y(t))^2 = 0,   y(T) = 0,

with gain f = -1 / (2 K).  Three solvers are provided: exact closed forms for
the classical families, a backward RK4 integrator for the general case, and a
polynomial root solver for finite moment combinations, where the backward
equation integrates exactly to an algebraic equation P(y) = kappa^2 theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from . import coeffs as cf
from .errors import (
    ConcavityError,
    CosDomainError,
    DomainError,
    OdeStepError,
    RootBracketError,
    UnsupportedVariantError,
)
from .moments import MomentVector, double_factorial
from .objectives import ObjectiveSpec, curvature_sum, has_closed_form_curvature, psi

_BISECT_STEPS = 30
_NEWTON_STEPS = 3


@dataclass(frozen=True)
class ConcavityReport:
    margins: np.ndarray  # K(t_k, y_k) per node
    worst: float
    ok: bool


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Equilibrium loading and induced value function on the grid.

    ``y_fn`` evaluates the terminal feedback variance between nodes: exactly
    for solvers with a closed form, through a cubic spline of the node values
    otherwise.  The loading between nodes is always recovered from the
    pointwise condition beta = kappa b / d^2 * (-1 / (2 K)).
    """

    coeffs: cf.CoefficientSet
    objective: ObjectiveSpec
    discount: cf.DiscountCache
    y: np.ndarray
    beta: np.ndarray
    solver_name: str
    concavity: ConcavityReport
    y_fn: object
    ode_error_estimate: float = 0.0

    @property
    def grid(self) -> cf.TimeGrid:
        return self.coeffs.grid

    @cached_property
    def control_offset_nodes(self) -> np.ndarray:
        return -self.coeffs.f_nodes / self.coeffs.d_nodes

    @cached_property
    def control_nodes(self) -> np.ndarray:
        return self.beta / self.discount.growth + self.control_offset_nodes

    def y_many(self, t):
        return np.maximum(np.asarray(self.y_fn(np.asarray(t, dtype=float)), dtype=float), 0.0)

    def y_at(self, t: float) -> float:
        return float(self.y_many(self.grid.require_time(t)))

    @cached_property
    def _curvature_spline(self):
        return CubicSpline(self.grid.nodes, self.concavity.margins)

    def curvature_many(self, t):
        """K(t, y_t) along the solution, vectorized.

        Variants whose curvature needs quadrature or finite differences per
        query point are interpolated from the node margins instead (the
        spline reproduces the node values exactly).
        """
        t = np.asarray(t, dtype=float)
        if has_closed_form_curvature(self.objective.variant):
            return curvature_sum(self.objective, t, self.y_many(t))
        return np.asarray(self._curvature_spline(t), dtype=float)

    def beta_many(self, t):
        t = np.asarray(t, dtype=float)
        margins = self.curvature_many(t)
        if np.any(margins >= 0.0):
            raise ConcavityError("curvature not negative between nodes")
        b = np.asarray(self.coeffs.control_drift(t), dtype=float)
        d = np.asarray(self.coeffs.control_vol(t), dtype=float)
        return self.objective.kappa * b / d**2 * (-0.5 / margins)

    def beta_at(self, t: float) -> float:
        return float(self.beta_many(self.grid.require_time(t)))

    def control_many(self, t):
        """Equilibrium control path evaluated at arbitrary times."""
        t = np.asarray(t, dtype=float)
        d = np.asarray(self.coeffs.control_vol(t), dtype=float)
        f = np.asarray(self.coeffs.vol_offset(t), dtype=float)
        return self.beta_many(t) * np.exp(-self.discount.int_a_many(t)) - f / d

    def control(self, t: float, x: float = 0.0) -> float:
        """Equilibrium control; the state argument is accepted but unused."""
        return float(self.control_many(self.grid.require_time(t)))

    def _gaussian_vector(self, y: float) -> MomentVector:
        variant = self.objective.variant
        order = variant.order if hasattr(variant, "order") else 2
        return MomentVector.gaussian(max(order, 2), y)

    def risk_value(self, t: float) -> float:
        """psi evaluated on the Gaussian law generated by the feedback."""
        return psi(self.objective, t, self._gaussian_vector(self.y_at(t)))

    def value(self, t: float, x: float) -> float:
        """Equilibrium value function V(t, x)."""
        t = self.grid.require_time(t)
        kappa = self.objective.kappa
        mean_part = kappa * cf.big_theta(self.coeffs, t, x, self.discount)
        drift_part = kappa * cf.integrate(
            self.coeffs.b_nodes * self.beta, self.grid, t, self.grid.horizon
        )
        return mean_part + drift_part + self.risk_value(t)

    def terminal_mean(self, t: float, x: float) -> float:
        """Conditional mean of X_T under the equilibrium feedback from (t, x)."""
        t = self.grid.require_time(t)
        return cf.big_theta(self.coeffs, t, x, self.discount) + cf.integrate(
            self.coeffs.b_nodes * self.beta, self.grid, t, self.grid.horizon
        )

    def integral_equation_residuals(self) -> np.ndarray:
        """Scaled residual of the pointwise equilibrium condition per node."""
        lead = self.objective.kappa * self.coeffs.b_nodes / self.coeffs.d_nodes**2
        res = lead + 2.0 * self.beta * self.concavity.margins
        return np.abs(res) / (1.0 + np.abs(lead))

    def self_consistency_error(self) -> float:
        """max_k |int_t_k^T (d beta)^2 - y_k|, the feedback/variance gap."""
        gaps = [
            abs(cf.y_from_beta(self.coeffs, self.beta, t) - yk)
            for t, yk in zip(self.grid.nodes, self.y)
        ]
        return float(max(gaps))

    def concavity_check(self) -> ConcavityReport:
        return self.concavity


def _concavity_nodes(coeffs, spec, y_nodes) -> ConcavityReport:
    margins = np.asarray(curvature_sum(spec, coeffs.grid.nodes, y_nodes), dtype=float)
    worst = float(margins.max())
    return ConcavityReport(margins, worst, worst < 0.0)


def _assemble(coeffs, spec, y_nodes, solver_name, y_fn=None, ode_err=0.0) -> EquilibriumSolution:
    y_nodes = np.maximum(np.asarray(y_nodes, dtype=float), 0.0)
    report = _concavity_nodes(coeffs, spec, y_nodes)
    if not report.ok:
        raise ConcavityError(
            f"curvature condition failed: max K = {report.worst:.6g} (needs K < 0)"
        )
    lead = spec.kappa * coeffs.b_nodes / coeffs.d_nodes**2
    beta = lead * (-0.5 / report.margins)
    if y_fn is None:
        y_fn = CubicSpline(coeffs.grid.nodes, y_nodes)
    cache = cf.DiscountCache.from_coeffs(coeffs)
    return EquilibriumSolution(
        coeffs=coeffs,
        objective=spec,
        discount=cache,
        y=y_nodes,
        beta=beta,
        solver_name=solver_name,
        concavity=report,
        y_fn=y_fn,
        ode_error_estimate=ode_err,
    )


def theta_nodes(coeffs: cf.CoefficientSet) -> np.ndarray:
    return np.maximum(coeffs.theta_eval(coeffs.grid.nodes), 0.0)


def _solve_increasing(fn, dfn, target: float, hi0: float) -> float:
    """Solve fn(y) = target for increasing fn with fn(0) = 0, y >= 0."""
    if target <= 0.0:
        return 0.0
    hi = max(hi0, 1e-12)
    for _ in range(200):
        if fn(hi) >= target:
            break
        hi *= 2.0
    else:
        raise RootBracketError(f"could not bracket root for target {target:.6g}")
    lo = 0.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        slope = dfn(y)
        if slope <= 0.0:
            break
        step = (fn(y) - target) / slope
        y = min(max(y - step, lo), hi)
    return y


def _is_plain_variance(variant) -> bool:
    evens = variant.even_weights()
    return variant.weight(2) > 0.0 and all(w == 0.0 for j, w in evens if j >= 4)


def _is_variance_kurtosis(variant) -> bool:
    evens = variant.even_weights()
    return variant.weight(4) > 0.0 and all(w == 0.0 for j, w in evens if j >= 6)


def solve_closed_form(coeffs: cf.CoefficientSet, spec: ObjectiveSpec) -> EquilibriumSolution:
    """Exact solution for the families with a known closed form.

    Covers moment combinations up to order four and the exp / cosh / cos /
    ambiguous-cos penalties.  Raises UnsupportedVariantError otherwise.
    """
    variant = spec.variant
    kind = variant.kind
    kappa = spec.kappa
    budget = coeffs.theta_eval  # theta as a vectorized function of t
    k2 = kappa * kappa
    th = theta_nodes(coeffs)

    if kind == "moment_combo":
        if _is_plain_variance(variant):
            w2 = variant.weight(2)

            def y_fn(t):
                return k2 * budget(t) / (w2 * w2)

            return _assemble(coeffs, spec, k2 * th / (w2 * w2), "closed_form", y_fn)
        if _is_variance_kurtosis(variant):
            w2 = variant.weight(2)
            w4 = variant.weight(4)

            def y_fn(t):
                return 2.0 * (np.cbrt(w2**3 + 1.5 * w4 * k2 * budget(t)) - w2) / w4

            y_nodes = 2.0 * (np.cbrt(w2**3 + 1.5 * w4 * k2 * th) - w2) / w4
            return _assemble(coeffs, spec, y_nodes, "closed_form", y_fn)
        raise UnsupportedVariantError(
            "no closed form for moment combinations beyond order four; use the algebraic solver"
        )

    if kind in ("exp", "cosh"):
        c = variant.c

        def y_fn(t):
            return np.log1p(k2 * budget(t)) / (c * c)

        return _assemble(coeffs, spec, np.log1p(k2 * th) / (c * c), "closed_form", y_fn)

    if kind == "cos":
        c = variant.c
        budget0 = k2 * float(th[0])
        if budget0 >= 1.0:
            raise CosDomainError(
                f"cosine penalty unsolvable: squared risk budget {budget0:.6g} >= 1"
            )

        def y_fn(t):
            return -np.log1p(-k2 * budget(t)) / (c * c)

        return _assemble(coeffs, spec, -np.log1p(-k2 * th) / (c * c), "closed_form", y_fn)

    if kind == "ambiguous_cos":
        dist = variant.amplitude
        v = np.asarray(dist.values)
        p = np.asarray(dist.probs)
        vi2 = v[:, None] ** 2 + v[None, :] ** 2
        wij = p[:, None] * p[None, :] * (v[:, None] * v[None, :]) ** 2
        pos = vi2 > 0.0
        # pairs with vi2 = 0 have zero weight, so dropping them is exact
        flat_vi2 = vi2[pos]
        flat_w = wij[pos]
        weighted_sq = p * v * v

        def budget_many(y):
            # int_0^y E[H^2 exp(-H^2 z / 2)]^2 dz, pairwise exact, vectorized
            ramp = 2.0 * (1.0 - np.exp(-0.5 * np.multiply.outer(y, flat_vi2))) / flat_vi2
            return ramp @ flat_w

        def slope_many(y):
            return (np.exp(-0.5 * np.multiply.outer(y, v * v)) @ weighted_sq) ** 2

        supremum = float(np.sum(2.0 * flat_w / flat_vi2))
        top = k2 * float(th.max())
        if top >= supremum:
            raise RootBracketError(
                f"risk budget {top:.6g} exceeds the reachable range {supremum:.6g} "
                "of the amplitude law"
            )

        def y_root_many(targets):
            targets = np.asarray(targets, dtype=float)
            out = np.zeros_like(targets)
            active = targets > 0.0
            if not np.any(active):
                return out
            tgt = targets[active]
            hi = 1.0 + tgt
            for _ in range(200):
                short = budget_many(hi) < tgt
                if not np.any(short):
                    break
                hi = np.where(short, 2.0 * hi, hi)
            else:
                raise RootBracketError(
                    f"could not bracket root for target {float(tgt.max()):.6g}"
                )
            lo = np.zeros_like(hi)
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                below = budget_many(mid) < tgt
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            y = 0.5 * (lo + hi)
            for _ in range(_NEWTON_STEPS):
                slope = slope_many(y)
                safe = np.where(slope > 0.0, slope, 1.0)
                step = np.where(slope > 0.0, (budget_many(y) - tgt) / safe, 0.0)
                y = np.clip(y - step, lo, hi)
            out[active] = y
            return out

        def y_fn(t):
            tgt = k2 * np.atleast_1d(budget(t))
            out = y_root_many(tgt)
            return out[0] if np.asarray(t).ndim == 0 else out

        return _assemble(coeffs, spec, y_root_many(k2 * th), "closed_form", y_fn)

    raise UnsupportedVariantError(f"no closed form for objective variant {kind!r}")


def solve_algebraic(coeffs: cf.CoefficientSet, spec: ObjectiveSpec) -> EquilibriumSolution:
    """Finite moment combinations via the exact first integral P(y) = kappa^2 theta.

    The backward equation for y integrates in closed form because the gain
    denominator -2K is a polynomial Q(y); P is the antiderivative of Q^2 and
    is strictly increasing, so each node reduces to a scalar root solve.
    """
    variant = spec.variant
    if variant.kind != "moment_combo":
        raise UnsupportedVariantError("the algebraic solver handles finite moment combinations only")
    q = np.polynomial.Polynomial(
        [
            variant.weight(2 * j + 2) / float(double_factorial(2 * j))
            for j in range(max(variant.order // 2, 1))
        ]
    )
    q_sq = q * q
    p = q_sq.integ()

    def y_root(target):
        return _solve_increasing(
            lambda z: float(p(z)), lambda z: float(q_sq(z)), target, 1.0 + target
        )

    k2 = spec.kappa * spec.kappa
    budget = coeffs.theta_eval
    y_nodes = np.array([y_root(k2 * float(g)) for g in theta_nodes(coeffs)])

    def y_fn(t):
        tgt = np.atleast_1d(k2 * budget(t))
        out = np.array([y_root(float(g)) for g in tgt])
        return out[0] if np.asarray(t).ndim == 0 else out

    return _assemble(coeffs, spec, y_nodes, "algebraic", y_fn)


def solve_ode(
    coeffs: cf.CoefficientSet,
    spec: ObjectiveSpec,
    *,
    tol: float = 1e-8,
    max_substeps: int = 16,
) -> EquilibriumSolution:
    """Backward RK4 integration of the scalar equation for y.

    Integrates y' = -(kappa b / d)^2 f(t, y)^2 from the terminal condition
    y(T) = 0 on the master grid, with a Richardson half-step error estimate;
    the step is refined only if the estimate misses ``tol``.
    """
    grid = coeffs.grid
    kappa = spec.kappa

    def rate(t, y):
        if y < 0.0:
            if y < -1e-12:
                raise OdeStepError(f"backward step left the admissible region: y = {y:.3e}")
            y = 0.0
        kk = curvature_sum(spec, t, y)
        if not (kk < 0.0):
            raise ConcavityError(
                f"curvature condition failed during integration: K({t:.6g}, {y:.6g}) = {kk:.6g}"
            )
        b = float(coeffs.control_drift(t))
        d = float(coeffs.control_vol(t))
        f_gain = -0.5 / kk
        return (kappa * b / d) ** 2 * f_gain * f_gain

    def run(substeps: int) -> np.ndarray:
        n = grid.num_steps
        h = grid.step / substeps
        out = np.empty(n + 1)
        out[n] = 0.0
        y = 0.0
        # march backward in time from the horizon
        for k in range(n, 0, -1):
            t_right = grid.nodes[k]
            for j in range(substeps):
                t1 = t_right - j * h
                k1 = rate(t1, y)
                k2 = rate(t1 - 0.5 * h, y + 0.5 * h * k1)
                k3 = rate(t1 - 0.5 * h, y + 0.5 * h * k2)
                k4 = rate(t1 - h, y + h * k3)
                y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            out[k - 1] = y
        return out

    coarse = run(1)
    substeps = 2
    fine = run(substeps)
    est = float(np.max(np.abs(fine - coarse))) / 15.0
    while est > tol and substeps < max_substeps:
        coarse, substeps = fine, substeps * 2
        fine = run(substeps)
        est = float(np.max(np.abs(fine - coarse))) / 15.0
    if est > tol:
        raise OdeStepError(
            f"backward integration stalled at error estimate {est:.3e} > tol {tol:.3e}"
        )
    return _assemble(coeffs, spec, fine, "ode", None, ode_err=est)


_SOLVERS = {
    "closed_form": solve_closed_form,
    "ode": solve_ode,
    "algebraic": solve_algebraic,
}


def solve(
    coeffs: cf.CoefficientSet,
    spec: ObjectiveSpec,
    solver: str = "auto",
    ode_tol: float | None = None,
) -> EquilibriumSolution:
    """Solve with the named solver, or pick the best available one."""
    ode_kwargs = {} if ode_tol is None else {"tol": float(ode_tol)}
    if solver != "auto":
        try:
            chosen = _SOLVERS[solver]
        except KeyError:
            raise DomainError(
                f"unknown solver {solver!r}; pick one of auto, " + ", ".join(_SOLVERS)
            ) from None
        if chosen is solve_ode:
            return chosen(coeffs, spec, **ode_kwargs)
        return chosen(coeffs, spec)
    try:
        return solve_closed_form(coeffs, spec)
    except UnsupportedVariantError:
        pass
    if spec.variant.kind == "moment_combo":
        return solve_algebraic(coeffs, spec)
    return solve_ode(coeffs, spec, **ode_kwargs)
