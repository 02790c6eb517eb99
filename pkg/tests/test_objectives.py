import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equicontrol import (
    AmbiguousCos,
    CosPenalty,
    CoshPenalty,
    DiscreteDistribution,
    DomainError,
    ExpPenalty,
    MomentCombo,
    MomentVector,
    ObjectiveError,
    ObjectiveSpec,
    StandardizedMoments,
    alpha,
    curvature_sum,
    psi,
    psi_grad_even,
)

from cases import fourier_gaussian_amplitude


class TestVariantValidation:
    def test_moment_combo_needs_positive_even_weight(self):
        with pytest.raises(ObjectiveError):
            MomentCombo(())
        with pytest.raises(ObjectiveError):
            MomentCombo((0.0, 1.0))  # only an odd weight
        with pytest.raises(ObjectiveError):
            MomentCombo((-1.0,))

    def test_moment_combo_trims_trailing_zeros(self):
        v = MomentCombo((2.0, 0.0, 1.0, 0.0, 0.0))
        assert v.order == 4
        assert v.weight(4) == 1.0
        assert v.weight(6) == 0.0

    def test_odd_weights_any_sign(self):
        v = MomentCombo((2.0, -3.0, 1.0, 4.0))
        assert v.weight(3) == -3.0
        assert v.weight(5) == 4.0

    def test_standardized_needs_variance_weight(self):
        with pytest.raises(ObjectiveError):
            StandardizedMoments((0.0, 1.0))

    def test_penalty_scale_positive(self):
        for cls in (ExpPenalty, CoshPenalty, CosPenalty):
            with pytest.raises(ObjectiveError):
                cls(0.0)

    def test_spec_kappa(self):
        with pytest.raises(DomainError):
            ObjectiveSpec(-0.5, MomentCombo((2.0,)))
        with pytest.raises(ObjectiveError):
            ObjectiveSpec(1.0, "not a variant")

    def test_is_penalty(self):
        assert ObjectiveSpec(1.0, ExpPenalty(1.0)).is_penalty
        assert not ObjectiveSpec(1.0, MomentCombo((2.0,))).is_penalty


class TestPsi:
    def test_moment_combo_oracle(self):
        """Alternating-sign weighted sum over central moments, frozen by hand."""
        variant = MomentCombo((2.0, 1.0, 1.0, 0.0, 0.5))
        mv = MomentVector(order=6, mean=0.3, central=(1.1, 0.2, 3.4, 1.0, 16.0))
        got = psi(ObjectiveSpec(1.0, variant), 0.0, mv)
        assert got == pytest.approx(-1.2194444444444443, rel=1e-14)

    def test_standardized_oracle(self):
        variant = StandardizedMoments((2.0, 1.0, 0.5))
        mv = MomentVector(order=4, mean=0.0, central=(1.1, 0.2, 3.4))
        got = psi(ObjectiveSpec(1.0, variant), 0.0, mv)
        assert got == pytest.approx(-1.1296471391688665, rel=1e-13)

    def test_standardized_zero_variance(self):
        variant = StandardizedMoments((2.0, 1.0))
        degenerate = MomentVector(order=3, mean=0.0, central=(0.0, 0.0))
        assert psi(ObjectiveSpec(1.0, variant), 0.0, degenerate) == 0.0
        bad = MomentVector(order=3, mean=0.0, central=(0.0, 0.5))
        with pytest.raises(DomainError):
            psi(ObjectiveSpec(1.0, variant), 0.0, bad)

    def test_order_guard(self):
        variant = MomentCombo((2.0, 0.0, 1.0))  # needs moments up to order 4
        mv = MomentVector(order=3, mean=0.0, central=(1.0, 0.0))
        with pytest.raises(DomainError):
            psi(ObjectiveSpec(1.0, variant), 0.0, mv)

    def test_gaussian_penalty_normalized_at_zero(self):
        spec = ObjectiveSpec(1.0, fourier_gaussian_amplitude())
        assert psi(spec, 0.0, MomentVector.gaussian(2, 0.0)) == pytest.approx(0.0, abs=1e-12)

    def test_exp_penalty_gaussian_closed_form(self):
        spec = ObjectiveSpec(1.0, ExpPenalty(1.0))
        y = 0.9
        got = psi(spec, 0.0, MomentVector.gaussian(2, y))
        assert got == pytest.approx(-(math.exp(y / 2) - 1.0), rel=1e-13)

    @given(y=st.floats(0.01, 2.0), c=st.floats(0.3, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_exp_series_telescopes_to_closed_form(self, y, c):
        """The truncated even-moment series of the exp shape converges to the
        closed form: sum_j c^(2j-1)/(2j)! alpha_2j(y) = (e^(c^2 y/2) - 1)/c."""
        total = 0.0
        for j in range(1, 41):
            total += c ** (2 * j - 1) / math.factorial(2 * j) * alpha(2 * j, y)
        closed = (math.exp(c * c * y / 2.0) - 1.0) / c
        assert total == pytest.approx(closed, rel=1e-8)


class TestPsiGradient:
    @given(y=st.floats(0.01, 3.0))
    @settings(max_examples=30, deadline=None)
    def test_exp_gradient_matches_finite_difference(self, y):
        spec = ObjectiveSpec(1.0, ExpPenalty(0.8))
        grad = psi_grad_even(spec, 0.0, y)
        # compare d psi / d z_2 against a finite difference of psi itself
        step = 1e-6 * max(1.0, y)
        up = MomentVector.gaussian(2, y + step).untagged()
        dn = MomentVector.gaussian(2, y - step).untagged()
        fd = (psi(spec, 0.0, up) - psi(spec, 0.0, dn)) / (2.0 * step)
        assert grad.values[0] == pytest.approx(fd, rel=5e-5, abs=1e-10)

    def test_moment_combo_gradient_is_constant(self):
        spec = ObjectiveSpec(1.0, MomentCombo((2.0, 0.0, 1.0)))
        grad = psi_grad_even(spec, 0.0, 0.7)
        assert grad.values[0] == pytest.approx(-1.0)  # -kappa_2 / 2!
        assert grad.values[1] == pytest.approx(-1.0 / 24.0)  # -kappa_4 / 4!


class TestCurvatureSum:
    def test_exp_closed_form(self):
        spec = ObjectiveSpec(1.0, ExpPenalty(1.0))
        y = 0.7
        assert curvature_sum(spec, 0.0, y) == pytest.approx(
            -0.5 * math.exp(y / 2.0), rel=1e-12
        )

    def test_cos_closed_form(self):
        spec = ObjectiveSpec(1.0, CosPenalty(0.8))
        y = 0.5
        assert curvature_sum(spec, 0.0, y) == pytest.approx(
            -0.4 * math.exp(-(0.8**2) * y / 2.0), rel=1e-12
        )

    def test_moment_combo_identity(self):
        spec = ObjectiveSpec(1.0, MomentCombo((2.0, 0.0, 1.5, 0.0, 0.9)))
        y = 1.3
        expect = -0.5 * (2.0 + 1.5 * y / 2.0 + 0.9 * y * y / 8.0)
        assert curvature_sum(spec, 0.0, y) == pytest.approx(expect, rel=1e-13)

    def test_vectorized_matches_scalar(self):
        ys = np.linspace(0.0, 2.0, 7)
        for spec in (
            ObjectiveSpec(1.0, ExpPenalty(1.0)),
            ObjectiveSpec(1.0, CoshPenalty(0.7)),
            ObjectiveSpec(1.0, MomentCombo((1.0, 0.0, 1.0))),
            ObjectiveSpec(1.0, AmbiguousCos(DiscreteDistribution((1.5, 2.5), (0.5, 0.5)))),
            ObjectiveSpec(1.0, fourier_gaussian_amplitude()),
        ):
            vec = curvature_sum(spec, 0.0, ys)
            scalars = np.array([curvature_sum(spec, 0.0, float(y)) for y in ys])
            np.testing.assert_allclose(vec, scalars, rtol=1e-13)

    def test_ambiguous_matches_series(self):
        """Curvature from the integral form agrees with the slot-sum definition."""
        dist = DiscreteDistribution((1.5, 2.5), (0.5, 0.5))
        spec = ObjectiveSpec(1.0, AmbiguousCos(dist))
        y = 0.6
        # K(y) = -1/2 E[H^2 e^{-H^2 y/2}]
        expect = -0.5 * dist.mean_exp_sq(y, weight_power=2)
        assert curvature_sum(spec, 0.0, y) == pytest.approx(expect, rel=1e-13)

    def test_fourier_gaussian_amplitude_closed_form(self):
        spec = ObjectiveSpec(1.0, fourier_gaussian_amplitude())
        y = 0.4
        # amplitude ~ N(0,1): K(y) = -1/2 E[H^2 e^{-H^2 y/2}] = -(1+y)^{-3/2}/2
        assert curvature_sum(spec, 0.0, y) == pytest.approx(
            -0.5 * (1.0 + y) ** -1.5, rel=1e-7
        )

    def test_standardized_cancellation(self):
        """For standardized weights the skew term cancels: K = -kappa_2 / 2."""
        spec = ObjectiveSpec(1.0, StandardizedMoments((2.0, 1.0)))
        for y in (0.2, 0.9, 1.7):
            assert curvature_sum(spec, 0.0, y) == pytest.approx(-1.0, rel=1e-6)

    def test_odd_weights_do_not_move_curvature(self):
        base = curvature_sum(ObjectiveSpec(1.0, MomentCombo((2.0, 0.0, 1.0))), 0.0, 0.8)
        for odd3, odd5 in ((1.0, 2.0), (-3.0, 4.0)):
            v = MomentCombo((2.0, odd3, 1.0, odd5))
            got = curvature_sum(ObjectiveSpec(1.0, v), 0.0, 0.8)
            assert got == base  # bitwise: odd slots never enter
