"""Numerical verification of the equilibrium property.

Under any deterministic control the terminal state is Gaussian, so the
objective of a candidate control can be evaluated exactly (up to quadrature)
from its mean and variance.  That single fact powers every check here:

* spike variations: perturbing the equilibrium control on [t, t + eps) must
  not improve the objective to first order, and the limit of the loss rate
  is predicted in closed form by the curvature of the objective;
* the diagonal of the first- and second-order adjoint processes satisfies
  the stochastic maximum principle conditions pointwise;
* the conditional moments of the terminal state solve the moment equations
  (checked with finite differences against closed-form moment surfaces);
* Monte Carlo simulation of the controlled dynamics reproduces the predicted
  terminal mean and central moments within sampling error.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coeffs as cf
from .equilibrium import EquilibriumSolution
from .errors import DomainError, GridMismatchError
from .moments import MomentVector, alpha, double_factorial, raw_to_central
from .objectives import ObjectiveSpec, curvature_sum, psi

_SNAP = 1e-12
_MC_BLOCK = 1 << 17
_MC_PATH_STEP_CAP = 1 << 34
_MC_MAX_ORDER = 8


def _gaussian_order(spec: ObjectiveSpec) -> int:
    variant = spec.variant
    return max(getattr(variant, "order", 2), 2)


@dataclass(frozen=True, eq=False)
class DeterministicControl:
    """A deterministic control path on the horizon.

    The base path is either an exact vectorized evaluator ``fn`` or the
    piecewise-linear interpolant of (times, values); ``offsets`` add
    piecewise-constant bumps on half-open windows [start, stop), which is how
    spike perturbations are represented without losing the jump locations.
    """

    times: np.ndarray
    values: np.ndarray
    offsets: tuple = ()
    fn: object = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1 or times.size < 2:
            raise GridMismatchError("control needs matching 1-d times and values (>= 2 samples)")
        if np.any(np.diff(times) <= 0.0):
            raise DomainError("control sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_solution(cls, sol: EquilibriumSolution) -> "DeterministicControl":
        return cls(sol.grid.nodes, sol.control_nodes, fn=sol.control_many)

    @classmethod
    def constant(cls, value: float, t0: float, t1: float) -> "DeterministicControl":
        return cls(np.array([t0, t1]), np.array([value, value]))

    def with_offset(self, start: float, stop: float, delta: float) -> "DeterministicControl":
        if not stop > start:
            raise DomainError(f"empty offset window [{start}, {stop})")
        return DeterministicControl(
            self.times, self.values, self.offsets + ((start, stop, delta),), self.fn
        )

    def base_sample(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(ts), dtype=float)
        return np.interp(ts, self.times, self.values)

    def sample(self, ts) -> np.ndarray:
        out = self.base_sample(ts)
        ts = np.asarray(ts, dtype=float)
        for start, stop, delta in self.offsets:
            out = out + delta * ((ts >= start) & (ts < stop))
        return out


@dataclass(frozen=True)
class DeterministicEvaluation:
    mean: float
    variance: float
    value: float


def _piece_quadrature(points_per_piece):
    """Concatenate composite-Simpson points and weights for a list of pieces."""
    pts, wts, mids = [], [], []
    for p, q, nsub in points_per_piece:
        n = 2 * nsub
        x = np.linspace(p, q, n + 1)
        w = np.empty(n + 1)
        h = (q - p) / nsub
        w[0] = w[-1] = h / 6.0
        w[1:-1:2] = 4.0 * h / 6.0
        w[2:-1:2] = 2.0 * h / 6.0
        pts.append(x)
        wts.append(w)
        mids.append(np.full(n + 1, 0.5 * (p + q)))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(mids)


def evaluate_deterministic(
    coeffs: cf.CoefficientSet,
    spec: ObjectiveSpec,
    t: float,
    x: float,
    control: DeterministicControl,
    cache: cf.DiscountCache | None = None,
) -> DeterministicEvaluation:
    """Exact objective of a deterministic control started at (t, x).

    The terminal state is Gaussian with

        mean = x e^{int_t^T a} + int_t^T e^{int_s^T a} (b u + c) ds
        var  = int_t^T e^{2 int_s^T a} (d u + f)^2 ds

    and the objective is kappa * mean + psi on that Gaussian law.  Quadrature
    pieces are split at every control breakpoint and offset edge, so spike
    windows far smaller than a grid cell are integrated exactly.
    """
    grid = coeffs.grid
    t = grid.require_time(t)
    horizon = grid.horizon
    cache = cache or cf.DiscountCache.from_coeffs(coeffs)
    snap = _SNAP * max(1.0, horizon)
    if control.fn is None:
        if control.times[0] > t + snap or control.times[-1] < horizon - snap:
            raise DomainError("control samples do not cover [t, horizon]")
    if horizon - t <= snap:
        mean = x * cache.growth_at(t)
        value = spec.kappa * mean + psi(
            spec, t, MomentVector.gaussian(_gaussian_order(spec), 0.0)
        )
        return DeterministicEvaluation(mean, 0.0, value)

    cuts = [t, horizon]
    for s in control.times:
        if t + snap < s < horizon - snap:
            cuts.append(float(s))
    for start, stop, _ in control.offsets:
        for s in (start, stop):
            if t + snap < s < horizon - snap:
                cuts.append(float(s))
    cuts = sorted(set(cuts))
    # merge cuts closer than the snap width
    pieces = []
    h_ref = grid.step
    prev = cuts[0]
    for s in cuts[1:]:
        if s - prev <= snap:
            continue
        nsub = max(1, math.ceil((s - prev) / h_ref - 1e-9))
        pieces.append((prev, s, nsub))
        prev = s

    pts, wts, mids = _piece_quadrature(pieces)
    u = control.base_sample(pts)
    for start, stop, delta in control.offsets:
        u = u + delta * ((mids >= start) & (mids < stop))

    growth = np.exp(cache.int_a_many(pts))
    b = np.asarray(coeffs.control_drift(pts), dtype=float)
    c = np.asarray(coeffs.drift_offset(pts), dtype=float)
    d = np.asarray(coeffs.control_vol(pts), dtype=float)
    f = np.asarray(coeffs.vol_offset(pts), dtype=float)

    mean = x * cache.growth_at(t) + float(np.dot(wts, growth * (b * u + c)))
    variance = float(np.dot(wts, growth * growth * (d * u + f) ** 2))
    variance = max(variance, 0.0)
    value = spec.kappa * mean + psi(
        spec, t, MomentVector.gaussian(_gaussian_order(spec), variance)
    )
    return DeterministicEvaluation(mean, variance, value)


@dataclass(frozen=True)
class SpikeTestReport:
    """First-order loss of a spike perturbation against its predicted limit.

    ``ratios`` holds (J_perturbed - J_equilibrium) / eps for each window
    width; ``extrapolated`` removes the O(eps) correction by Richardson
    extrapolation.  The predicted limit is
    exp(2 int_t^T a) d(t)^2 zeta^2 K(t, y(t)), which is nonpositive exactly
    when the curvature condition holds.
    """

    t: float
    zeta: float
    x: float
    epsilons: tuple
    ratios: tuple
    extrapolated: float
    predicted_limit: float
    limit_tol: float
    match_tol: float
    nonpositive_ok: bool
    match_ok: bool
    passed: bool


def spike_test(
    sol: EquilibriumSolution,
    t: float,
    zeta: float,
    x: float = 0.0,
    epsilons=None,
    limit_tol: float = 1e-6,
    match_tol: float = 1e-3,
) -> SpikeTestReport:
    """Perturb the equilibrium control by zeta on [t, t + eps) and extrapolate.

    Evaluates the exact Gaussian objective of the spiked and the unspiked
    control on identical quadrature decompositions, so the common part of the
    two integrals cancels to rounding.
    """
    grid = sol.grid
    t = grid.require_time(t)
    remaining = grid.horizon - t
    if remaining <= 1e-9 * grid.horizon:
        raise DomainError("spike test needs t strictly before the horizon")
    if epsilons is None:
        epsilons = tuple(remaining * 2.0**-k for k in range(4, 11))
    else:
        epsilons = tuple(float(e) for e in epsilons)
        if any(e <= 0.0 or e > remaining for e in epsilons):
            raise DomainError("spike widths must lie in (0, horizon - t]")

    base = DeterministicControl.from_solution(sol)
    cache = sol.discount
    ratios = []
    for eps in epsilons:
        stop = min(t + eps, grid.horizon)
        plain = base.with_offset(t, stop, 0.0)
        spiked = base.with_offset(t, stop, zeta)
        j0 = evaluate_deterministic(sol.coeffs, sol.objective, t, x, plain, cache).value
        j1 = evaluate_deterministic(sol.coeffs, sol.objective, t, x, spiked, cache).value
        ratios.append((j1 - j0) / eps)

    if len(ratios) >= 2:
        extrapolated = 2.0 * ratios[-1] - ratios[-2]
    else:
        extrapolated = ratios[-1]
    d_t = float(sol.coeffs.control_vol(t))
    predicted = (
        math.exp(2.0 * cache.int_a_at(t))
        * d_t
        * d_t
        * zeta
        * zeta
        * curvature_sum(sol.objective, t, sol.y_at(t))
    )
    nonpositive_ok = extrapolated <= limit_tol
    match_ok = abs(extrapolated - predicted) <= match_tol * (1.0 + abs(predicted))
    return SpikeTestReport(
        t=t,
        zeta=zeta,
        x=x,
        epsilons=epsilons,
        ratios=tuple(ratios),
        extrapolated=extrapolated,
        predicted_limit=predicted,
        limit_tol=limit_tol,
        match_tol=match_tol,
        nonpositive_ok=nonpositive_ok,
        match_ok=match_ok,
        passed=nonpositive_ok and match_ok,
    )


@dataclass(frozen=True)
class FbsdeDiagnostic:
    """Diagonal values of the adjoint processes at one time.

    ``adjoint`` and ``adjoint_diffusion`` are the level and diffusion loading
    of the first-order adjoint started at t, evaluated at s = t; the
    stochastic maximum principle requires b * adjoint + d * adjoint_diffusion
    to vanish and the second-order adjoint diagonal to be negative.
    """

    t: float
    adjoint: float
    adjoint_diffusion: float
    second_adjoint: float
    optimality_residual: float
    second_adjoint_negative: bool
    tol: float
    passed: bool


def fbsde_diagonal_check(sol: EquilibriumSolution, t: float, tol: float = 1e-8) -> FbsdeDiagnostic:
    t = sol.grid.require_time(t)
    kappa = sol.objective.kappa
    growth = math.exp(sol.discount.int_a_at(t))
    curv2 = 2.0 * float(curvature_sum(sol.objective, t, sol.y_at(t)))
    d_t = float(sol.coeffs.control_vol(t))
    b_t = float(sol.coeffs.control_drift(t))
    adjoint = kappa * growth
    adjoint_diffusion = growth * d_t * sol.beta_at(t) * curv2
    second = growth * growth * curv2
    residual = abs(b_t * adjoint + d_t * adjoint_diffusion)
    neg_ok = second < 0.0
    passed = residual <= tol * (1.0 + kappa) and neg_ok
    return FbsdeDiagnostic(
        t=t,
        adjoint=adjoint,
        adjoint_diffusion=adjoint_diffusion,
        second_adjoint=second,
        optimality_residual=residual,
        second_adjoint_negative=neg_ok,
        tol=tol,
        passed=passed,
    )


@dataclass(frozen=True)
class PdeResidualRow:
    order: int
    scale: float
    max_residual: float
    scaled_residual: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class PdeResidualReport:
    rows: tuple
    terminal_gap: float
    passed: bool


def _moment_surface(sol: EquilibriumSolution):
    """Closed-form conditional raw moments m_j(t, x) of the terminal state.

    Under the equilibrium feedback the terminal law from (t, x) is Gaussian
    with mean mu(t, x) and variance y(t), so
    m_j = sum_k C(j, k) mu^(j-k) alpha(k, y).
    """
    from scipy.interpolate import CubicSpline

    coeffs = sol.coeffs
    cache = sol.discount
    nodes = coeffs.grid.nodes
    horizon = coeffs.grid.horizon
    drift_nodes = cache.growth * (
        coeffs.c_nodes - coeffs.b_nodes * coeffs.f_nodes / coeffs.d_nodes
    )
    # smooth antiderivatives keep the finite-difference stencil off the
    # kinks a piecewise-linear quadrature rule would introduce
    drift_anti = CubicSpline(nodes, drift_nodes).antiderivative()
    feed_anti = CubicSpline(nodes, coeffs.b_nodes * sol.beta).antiderivative()

    def moment(order, ts, x):
        ts = np.asarray(ts, dtype=float)
        mu = (
            x * np.exp(cache.int_a_many(ts))
            + (drift_anti(horizon) - drift_anti(ts))
            + (feed_anti(horizon) - feed_anti(ts))
        )
        y = sol.y_many(ts)
        out = np.zeros_like(mu)
        for k in range(0, order + 1, 2):
            coef = math.comb(order, k) * float(double_factorial(k - 1))
            out = out + coef * mu ** (order - k) * y ** (k // 2)
        return out

    return moment


def pde_residual_check(
    sol: EquilibriumSolution,
    orders=(1, 2, 3, 4),
    t_samples=None,
    x_samples=(-1.0, -0.5, 0.0, 1.0, 2.0),
    tol: float = 1e-5,
    first_order_tol: float = 1e-6,
) -> PdeResidualReport:
    """Apply the generator of the controlled diffusion to the moment surfaces.

    Each conditional moment m_j of the terminal state solves

        0 = dm/dt + (a x + b u + c) dm/dx + 1/2 (d u + f)^2 d2m/dx2

    with terminal data x^j.  Derivatives are taken with 5-point central
    finite differences (dt = horizon / 4096, dx = 1e-3 (1 + |x|)) and the
    residual is scaled by the largest moment magnitude over the sample set.
    """
    grid = sol.grid
    horizon = grid.horizon
    dt = horizon / 4096.0
    if t_samples is None:
        t_samples = np.linspace(0.1 * horizon, 0.9 * horizon, 5)
    t_samples = np.asarray(t_samples, dtype=float)
    if np.any(t_samples < 2.0 * dt) or np.any(t_samples > horizon - 2.0 * dt):
        raise DomainError("time samples must keep the 5-point stencil inside the horizon")
    x_samples = np.asarray(x_samples, dtype=float)

    moment = _moment_surface(sol)
    coeffs = sol.coeffs
    u = sol.control_many(t_samples)
    a_t = np.asarray(coeffs.state_drift(t_samples), dtype=float)
    b_t = np.asarray(coeffs.control_drift(t_samples), dtype=float)
    c_t = np.asarray(coeffs.drift_offset(t_samples), dtype=float)
    d_t = np.asarray(coeffs.control_vol(t_samples), dtype=float)
    f_t = np.asarray(coeffs.vol_offset(t_samples), dtype=float)
    vol_sq = (d_t * u + f_t) ** 2

    rows = []
    terminal_gap = 0.0
    for order in orders:
        worst = 0.0
        scale = 0.0
        for x in x_samples:
            dx = 1e-3 * (1.0 + abs(x))
            m0 = moment(order, t_samples, x)
            scale = max(scale, float(np.max(np.abs(m0))))
            m_t = (
                -moment(order, t_samples + 2 * dt, x)
                + 8.0 * moment(order, t_samples + dt, x)
                - 8.0 * moment(order, t_samples - dt, x)
                + moment(order, t_samples - 2 * dt, x)
            ) / (12.0 * dt)
            mp2 = moment(order, t_samples, x + 2 * dx)
            mp1 = moment(order, t_samples, x + dx)
            mm1 = moment(order, t_samples, x - dx)
            mm2 = moment(order, t_samples, x - 2 * dx)
            m_x = (-mp2 + 8.0 * mp1 - 8.0 * mm1 + mm2) / (12.0 * dx)
            m_xx = (-mp2 + 16.0 * mp1 - 30.0 * m0 + 16.0 * mm1 - mm2) / (12.0 * dx * dx)
            resid = m_t + (a_t * x + b_t * u + c_t) * m_x + 0.5 * vol_sq * m_xx
            worst = max(worst, float(np.max(np.abs(resid))))
            terminal_gap = max(
                terminal_gap,
                abs(float(moment(order, np.array([horizon]), x)[0]) - x**order),
            )
        denom = max(1.0, scale)
        row_tol = first_order_tol if order == 1 else tol
        rows.append(
            PdeResidualRow(
                order=order,
                scale=scale,
                max_residual=worst,
                scaled_residual=worst / denom,
                tol=row_tol,
                passed=worst / denom <= row_tol,
            )
        )
    passed = all(r.passed for r in rows) and terminal_gap <= 1e-10
    return PdeResidualReport(tuple(rows), terminal_gap, passed)


@dataclass(frozen=True)
class McMomentRow:
    order: int
    target: float
    estimate: float
    std_error: float
    passed: bool


@dataclass(frozen=True)
class McReport:
    """Monte Carlo check of the terminal law under the equilibrium control.

    Pass bands are three standard errors (delta-method standard errors for
    the central moments); degenerate moments with zero sampling error get a
    discretization allowance proportional to the Euler step instead.
    """

    x0: float
    seed: int
    num_paths: int
    num_steps: int
    mean_target: float
    mean_estimate: float
    mean_std_error: float
    mean_passed: bool
    rows: tuple
    passed: bool


def _mc_block_sums(x0, drift, growth, vol, sqdt, n_paths, key, max_power):
    rng = np.random.Generator(np.random.Philox(key=key))
    x = np.full(n_paths, float(x0))
    for k in range(drift.size):
        x = x * growth[k] + drift[k] + vol[k] * sqdt * rng.standard_normal(n_paths)
    sums = np.empty(max_power)
    p = x.copy()
    sums[0] = p.sum()
    for j in range(1, max_power):
        p *= x
        sums[j] = p.sum()
    return sums


def monte_carlo(
    sol: EquilibriumSolution,
    x0: float,
    seed: int,
    num_paths: int,
    num_steps: int,
    orders=(2, 3, 4),
    threads: int | None = None,
) -> McReport:
    """Euler simulation of the controlled state under the equilibrium feedback.

    Reproducible by construction: paths are generated in fixed blocks, each
    block with a counter-based generator keyed by (seed, first path index),
    so results do not depend on scheduling or thread count.
    """
    if num_paths < 2:
        raise DomainError("need at least 2 paths")
    if num_steps < 1:
        raise DomainError("need at least 1 time step")
    if num_paths * num_steps > _MC_PATH_STEP_CAP:
        raise DomainError(
            f"simulation of {num_paths} x {num_steps} exceeds the resource cap"
        )
    orders = tuple(int(j) for j in orders)
    if any(j < 2 for j in orders) or max(orders) > _MC_MAX_ORDER:
        raise DomainError(f"central moment orders must lie in 2..{_MC_MAX_ORDER}")
    if threads is None:
        threads = int(os.environ.get("EQUICONTROL_THREADS", "1") or "1")
    threads = max(1, threads)

    grid = sol.grid
    horizon = grid.horizon
    dt = horizon / num_steps
    sqdt = math.sqrt(dt)
    s_left = np.linspace(0.0, horizon, num_steps + 1)[:-1]
    u = sol.control_many(s_left)
    coeffs = sol.coeffs
    a = np.asarray(coeffs.state_drift(s_left), dtype=float)
    b = np.asarray(coeffs.control_drift(s_left), dtype=float)
    c = np.asarray(coeffs.drift_offset(s_left), dtype=float)
    d = np.asarray(coeffs.control_vol(s_left), dtype=float)
    f = np.asarray(coeffs.vol_offset(s_left), dtype=float)
    growth = 1.0 + a * dt
    drift = (b * u + c) * dt
    vol = d * u + f

    max_power = 2 * max(orders)
    blocks = []
    start = 0
    while start < num_paths:
        blocks.append((start, min(_MC_BLOCK, num_paths - start)))
        start += _MC_BLOCK

    def run_block(block):
        bstart, bsize = block
        return _mc_block_sums(x0, drift, growth, vol, sqdt, bsize, [seed, bstart], max_power)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run_block, blocks))
    else:
        partials = [run_block(b) for b in blocks]
    total = np.zeros(max_power)
    for part in partials:  # fixed reduction order keeps the result thread-independent
        total += part
    raw = tuple(total / num_paths)
    sample = raw_to_central(raw)

    mean_target = sol.terminal_mean(0.0, x0)
    y0 = sol.y_at(0.0)
    mean_se = math.sqrt(max(sample.central_moment(2), 0.0) / num_paths)
    disc_allow = dt * (1.0 + abs(mean_target))
    mean_err = abs(sample.mean - mean_target)
    mean_passed = mean_err <= 3.0 * mean_se if mean_se > 0.0 else mean_err <= disc_allow

    rows = []
    for j in orders:
        target = alpha(j, y0)
        est = sample.central_moment(j)
        # delta-method variance of the j-th central moment estimator
        var_j = (
            sample.central_moment(2 * j)
            - est * est
            + j * j * sample.central_moment(2) * sample.central_moment(j - 1) ** 2
            - 2.0 * j * sample.central_moment(j - 1) * sample.central_moment(j + 1)
        )
        se = math.sqrt(max(var_j, 0.0) / num_paths)
        err = abs(est - target)
        ok = err <= 3.0 * se if se > 0.0 else err <= dt * (1.0 + abs(target))
        rows.append(McMomentRow(j, target, est, se, ok))
    report = McReport(
        x0=x0,
        seed=seed,
        num_paths=num_paths,
        num_steps=num_steps,
        mean_target=mean_target,
        mean_estimate=sample.mean,
        mean_std_error=mean_se,
        mean_passed=mean_passed,
        rows=tuple(rows),
        passed=mean_passed and all(r.passed for r in rows),
    )
    return report


@dataclass(frozen=True)
class ValueConsistency:
    value_solution: float
    value_deterministic: float
    gap: float
    tol: float
    passed: bool


def value_consistency_check(
    sol: EquilibriumSolution, x: float, t: float = 0.0, tol: float = 1e-8
) -> ValueConsistency:
    """The deterministic evaluation of the equilibrium control matches V(t, x)."""
    det = evaluate_deterministic(
        sol.coeffs, sol.objective, t, x, DeterministicControl.from_solution(sol), sol.discount
    )
    v = sol.value(t, x)
    gap = abs(det.value - v)
    return ValueConsistency(v, det.value, gap, tol, gap <= tol * (1.0 + abs(v)))


def _plain(obj):
    """Recursively convert dataclass/numpy containers to JSON-ready values."""
    import dataclasses

    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def verification_report(
    sol: EquilibriumSolution,
    x0: float = 0.0,
    residual_tol: float = 1e-8,
    consistency_tol: float = 5e-6,
    value_tol: float = 1e-8,
    spike: dict | None = None,
    fbsde: dict | None = None,
    pde: dict | None = None,
    monte_carlo_cfg: dict | None = None,
) -> dict:
    """Run the verification suite on a solved equilibrium; JSON-ready output.

    The core checks (pointwise optimality residual, fixed-point
    self-consistency of the accumulated variance, objective concavity along
    the solution, and agreement of the claimed value with the exact Gaussian
    evaluation of the control) always run.  ``spike``, ``fbsde``, ``pde`` and
    ``monte_carlo_cfg`` enable the heavier suites; each accepts a dict of
    keyword overrides for the corresponding check (an empty dict means
    defaults).
    """
    horizon = sol.grid.horizon
    report: dict = {"solver": sol.solver_name, "x0": x0}

    residuals = sol.integral_equation_residuals()
    worst_resid = float(np.max(residuals))
    report["integral_equation"] = {
        "max_scaled_residual": worst_resid,
        "tol": residual_tol,
        "passed": worst_resid <= residual_tol,
    }

    self_err = sol.self_consistency_error()
    report["self_consistency"] = {
        "error": self_err,
        "tol": consistency_tol,
        "passed": self_err <= consistency_tol,
    }

    conc = sol.concavity_check()
    report["concavity"] = {"worst_margin": conc.worst, "passed": conc.ok}

    report["value_consistency"] = _plain(value_consistency_check(sol, x0, tol=value_tol))

    if spike is not None:
        cfg = dict(spike)
        times = cfg.pop("times", (0.0, 0.5 * horizon, 0.9 * horizon))
        zetas = cfg.pop("zetas", (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0))
        cases = [
            _plain(spike_test(sol, float(t), float(z), x=x0, **cfg))
            for t in times
            for z in zetas
        ]
        report["spike"] = {"cases": cases, "passed": all(c["passed"] for c in cases)}

    if fbsde is not None:
        cfg = dict(fbsde)
        times = cfg.pop("times", (0.0, 0.5 * horizon, 0.9 * horizon))
        cases = [_plain(fbsde_diagonal_check(sol, float(t), **cfg)) for t in times]
        report["fbsde"] = {"cases": cases, "passed": all(c["passed"] for c in cases)}

    if pde is not None:
        report["pde"] = _plain(pde_residual_check(sol, **pde))

    if monte_carlo_cfg is not None:
        cfg = {"x0": x0, "seed": 20240801, "num_paths": 200_000, "num_steps": 1024}
        cfg.update(monte_carlo_cfg)
        report["monte_carlo"] = _plain(monte_carlo(sol, **cfg))

    report["passed"] = all(
        section["passed"]
        for key, section in report.items()
        if isinstance(section, dict) and "passed" in section
    )
    return report
