import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equicontrol import (
    CoefficientError,
    CoefficientSet,
    ConstantCoefficient,
    DiscountCache,
    DomainError,
    ExponentialCoefficient,
    GridMismatchError,
    PolynomialCoefficient,
    SampledCoefficient,
    TimeGrid,
    big_theta,
    integrate,
    theta,
    y_from_beta,
)
from equicontrol.coeffs import SuffixQuadrature, coefficient_nodes

from cases import base_coeffs
from oracles import simpson_integral


class TestTimeGrid:
    def test_nodes_and_step(self):
        grid = TimeGrid(2.0, 8)
        assert grid.nodes[0] == 0.0
        assert grid.nodes[-1] == 2.0
        assert len(grid.nodes) == 9
        assert grid.step == pytest.approx(0.25)

    def test_refined(self):
        grid = TimeGrid(1.0, 4).refined(4)
        assert grid.num_steps == 16
        assert grid.horizon == 1.0

    def test_invalid(self):
        with pytest.raises(DomainError):
            TimeGrid(-1.0, 8)
        with pytest.raises(DomainError):
            TimeGrid(1.0, 1)

    def test_require_time(self):
        grid = TimeGrid(1.0, 8)
        assert grid.require_time(0.5) == 0.5
        with pytest.raises(DomainError):
            grid.require_time(1.5)
        with pytest.raises(DomainError):
            grid.require_time(-0.1)


class TestDescriptors:
    def test_constant(self):
        c = ConstantCoefficient(0.7)
        assert c(0.3) == 0.7
        np.testing.assert_allclose(c(np.array([0.0, 1.0])), [0.7, 0.7])
        assert c.integral(0.2, 1.2) == pytest.approx(0.7)

    def test_polynomial(self):
        p = PolynomialCoefficient((1.0, 2.0, 3.0))  # 1 + 2t + 3t^2
        assert p(2.0) == pytest.approx(17.0)
        assert p.integral(0.0, 1.0) == pytest.approx(1.0 + 1.0 + 1.0)

    def test_exponential(self):
        e = ExponentialCoefficient(2.0, -0.5, 1.0)
        assert e(0.0) == pytest.approx(3.0)
        exact = 2.0 / -0.5 * (math.exp(-0.5) - 1.0) + 1.0
        assert e.integral(0.0, 1.0) == pytest.approx(exact, rel=1e-14)

    def test_exponential_zero_rate(self):
        e = ExponentialCoefficient(2.0, 0.0, 1.0)
        assert e.integral(0.0, 2.0) == pytest.approx(6.0)

    def test_sampled_linear_interp(self):
        s = SampledCoefficient(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        assert s(0.5) == pytest.approx(1.0)
        assert s(1.5) == pytest.approx(1.0)
        # piecewise-linear integral is exact
        assert s.integral(0.0, 2.0) == pytest.approx(2.0)
        assert s.integral(0.25, 0.75) == pytest.approx(0.5)

    def test_sampled_validation(self):
        with pytest.raises(GridMismatchError):
            SampledCoefficient(np.array([0.0, 1.0]), np.array([1.0]))
        with pytest.raises(CoefficientError):
            SampledCoefficient(np.array([1.0, 0.5]), np.array([1.0, 2.0]))

    def test_on_grid(self):
        grid = TimeGrid(1.0, 4)
        s = SampledCoefficient.on_grid(grid, np.arange(5.0))
        np.testing.assert_allclose(s(grid.nodes), np.arange(5.0))

    def test_antiderivative_matches_quadrature(self):
        for coeff in (
            PolynomialCoefficient((0.3, -1.0, 0.5, 2.0)),
            ExponentialCoefficient(1.2, 0.8, -0.3),
        ):
            oracle = simpson_integral(coeff, 0.2, 1.7)
            assert coeff.integral(0.2, 1.7) == pytest.approx(oracle, rel=1e-10)


class TestIntegrate:
    def test_cubic_exact_on_whole_cells(self):
        grid = TimeGrid(1.0, 16)
        values = grid.nodes**3
        assert integrate(values, grid, 0.0, 1.0) == pytest.approx(0.25, abs=1e-15)

    def test_quadratic_partial_cells(self):
        """Off-node endpoints fall back to trapezoid slivers, O(step^3) locally."""
        a, b = 0.1003, 0.7777
        exact = (b - a) + (b**2 - a**2) / 2 + (b**3 - a**3) / 3
        errors = {}
        for n in (64, 256):
            grid = TimeGrid(1.0, n)
            values = 1.0 + grid.nodes + grid.nodes**2
            errors[n] = abs(integrate(values, grid, a, b) - exact)
        assert errors[64] <= 2e-6
        assert errors[256] <= 1e-8
        assert errors[256] <= errors[64] / 20.0

    def test_empty_and_reversed(self):
        grid = TimeGrid(1.0, 8)
        values = np.ones(9)
        assert integrate(values, grid, 0.5, 0.5) == 0.0
        with pytest.raises(DomainError):
            integrate(values, grid, 0.7, 0.2)

    def test_outside_horizon(self):
        grid = TimeGrid(1.0, 8)
        with pytest.raises(DomainError):
            integrate(np.ones(9), grid, 0.0, 1.5)

    def test_wrong_shape(self):
        grid = TimeGrid(1.0, 8)
        with pytest.raises(GridMismatchError):
            integrate(np.ones(5), grid, 0.0, 1.0)

    @given(
        seed=st.integers(0, 2**31 - 1),
        ka=st.integers(0, 7),
        kb=st.integers(9, 16),
    )
    @settings(max_examples=40, deadline=None)
    def test_refinement_convergence(self, seed, ka, kb):
        """High-order error decay between node-aligned endpoints.

        Endpoints are multiples of 1/16 so they are nodes of both grids and
        the Simpson core (rather than the endpoint slivers) is what is being
        measured.
        """
        rng = np.random.default_rng(seed)
        c0, c1 = rng.uniform(0.5, 2.0, size=2)
        a, b = ka / 16.0, kb / 16.0

        def f(t):
            return np.exp(c0 * t) * np.sin(3.0 * c1 * t) + 1.0

        exact = simpson_integral(f, a, b, n=6000)
        coarse = TimeGrid(1.0, 32)
        fine = TimeGrid(1.0, 64)
        err_coarse = abs(integrate(f(coarse.nodes), coarse, a, b) - exact)
        err_fine = abs(integrate(f(fine.nodes), fine, a, b) - exact)
        if err_coarse > 1e-12:
            assert err_fine <= err_coarse / 3.0


class TestSuffixQuadrature:
    def test_matches_integrate_at_nodes(self):
        grid = TimeGrid(1.0, 17)  # odd cell count exercises the tail rule
        rng = np.random.default_rng(7)
        values = rng.normal(size=grid.nodes.size)
        sq = SuffixQuadrature(values, grid)
        got = sq(grid.nodes)
        for i, t in enumerate(grid.nodes):
            assert got[i] == integrate(values, grid, t, 1.0)

    def test_off_node_linear(self):
        grid = TimeGrid(1.0, 8)
        values = 2.0 * grid.nodes  # linear, partial-cell trapezoid is exact
        sq = SuffixQuadrature(values, grid)
        for t in (0.03, 0.51, 0.99):
            assert sq(t) == pytest.approx(1.0 - t * t, abs=1e-14)


class TestCoefficientSet:
    def test_vol_floor(self):
        grid = TimeGrid(1.0, 8)
        with pytest.raises(CoefficientError):
            CoefficientSet(
                grid,
                state_drift=ConstantCoefficient(0.0),
                control_drift=ConstantCoefficient(0.3),
                drift_offset=ConstantCoefficient(0.0),
                control_vol=PolynomialCoefficient((0.2, -0.4)),  # crosses zero
                vol_offset=ConstantCoefficient(0.0),
            )

    def test_sampled_must_cover_horizon(self):
        grid = TimeGrid(2.0, 8)
        short = SampledCoefficient(np.array([0.0, 1.0]), np.array([0.3, 0.3]))
        with pytest.raises(CoefficientError):
            CoefficientSet(
                grid,
                state_drift=ConstantCoefficient(0.0),
                control_drift=short,
                drift_offset=ConstantCoefficient(0.0),
                control_vol=ConstantCoefficient(0.2),
                vol_offset=ConstantCoefficient(0.0),
            )

    def test_node_caches(self):
        coeffs = base_coeffs(32)
        np.testing.assert_allclose(coeffs.b_nodes, 0.3)
        np.testing.assert_allclose(coeffs.budget_rate_nodes, 2.25)
        nodes = coefficient_nodes(coeffs.control_drift, coeffs.grid)
        np.testing.assert_allclose(nodes, coeffs.b_nodes)


class TestDiscountCache:
    def test_constant_drift_semigroup(self):
        grid = TimeGrid(1.0, 64)
        coeffs = CoefficientSet(
            grid,
            state_drift=ConstantCoefficient(0.4),
            control_drift=ConstantCoefficient(0.3),
            drift_offset=ConstantCoefficient(0.0),
            control_vol=ConstantCoefficient(0.2),
            vol_offset=ConstantCoefficient(0.0),
        )
        cache = DiscountCache.from_coeffs(coeffs)
        assert cache.growth_at(0.0) == pytest.approx(math.exp(0.4), rel=1e-14)
        assert cache.growth_sq_at(0.25) == pytest.approx(math.exp(0.8 * 0.75), rel=1e-14)

    @given(t=st.floats(0.0, 1.0), s=st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_semigroup_property(self, t, s):
        """e^{int_t^T} = e^{int_t^s} e^{int_s^T} for a curved drift."""
        grid = TimeGrid(1.0, 64)
        coeffs = CoefficientSet(
            grid,
            state_drift=ExponentialCoefficient(0.3, 0.7),
            control_drift=ConstantCoefficient(0.3),
            drift_offset=ConstantCoefficient(0.0),
            control_vol=ConstantCoefficient(0.2),
            vol_offset=ConstantCoefficient(0.0),
        )
        cache = DiscountCache.from_coeffs(coeffs)
        lhs = cache.int_a_at(t)
        rhs = cache.int_a_at(s) + coeffs.int_state_drift(t) - coeffs.int_state_drift(s)
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestThetaAndVariance:
    def test_theta_budget(self):
        coeffs = base_coeffs(128)
        assert theta(coeffs, 0.0) == pytest.approx(2.25, rel=1e-12)
        assert theta(coeffs, 1.0) == 0.0

    def test_big_theta_terminal_identity(self):
        coeffs = base_coeffs(64)
        assert big_theta(coeffs, 1.0, 1.7) == pytest.approx(1.7)

    def test_big_theta_discounts_state(self):
        grid = TimeGrid(1.0, 64)
        coeffs = CoefficientSet(
            grid,
            state_drift=ConstantCoefficient(0.4),
            control_drift=ConstantCoefficient(0.3),
            drift_offset=ConstantCoefficient(0.1),
            control_vol=ConstantCoefficient(0.2),
            vol_offset=ConstantCoefficient(0.0),
        )
        # Theta(t, x) = x e^{a (T-t)} + C/a (e^{a (T-t)} - 1), with F = 0
        exact = 2.0 * math.exp(0.4) + 0.1 / 0.4 * (math.exp(0.4) - 1.0)
        assert big_theta(coeffs, 0.0, 2.0) == pytest.approx(exact, rel=1e-12)

    def test_y_from_beta_constant(self):
        coeffs = base_coeffs(128)
        beta = np.full(coeffs.grid.nodes.size, 3.75)
        # y_0 = int (d beta)^2 = (0.2 * 3.75)^2 = 0.5625
        assert y_from_beta(coeffs, beta, 0.0) == pytest.approx(0.5625, rel=1e-12)

    def test_y_from_beta_shape_guard(self):
        coeffs = base_coeffs(16)
        with pytest.raises(GridMismatchError):
            y_from_beta(coeffs, np.ones(4), 0.0)
