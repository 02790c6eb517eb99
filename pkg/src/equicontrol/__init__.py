"""Time-consistent controls for moment-based terminal objectives.

The package solves for the equilibrium (time-consistent) feedback control of
a linearly controlled diffusion whose objective combines the conditional mean
of the terminal state with a function of its higher central moments, and
verifies the solution numerically: spike perturbations, adjoint-process
diagonals, moment equations and Monte Carlo simulation.
"""

from .coeffs import (
    CoefficientSet,
    ConstantCoefficient,
    DiscountCache,
    ExponentialCoefficient,
    PolynomialCoefficient,
    SampledCoefficient,
    TimeGrid,
    big_theta,
    integrate,
    theta,
    y_from_beta,
)
from .equilibrium import (
    EquilibriumSolution,
    solve,
    solve_algebraic,
    solve_closed_form,
    solve_ode,
)
from .errors import (
    CoefficientError,
    ConcavityError,
    ConfigError,
    CosDomainError,
    DomainError,
    EquicontrolError,
    GridMismatchError,
    ObjectiveError,
    OdeStepError,
    QuadratureError,
    RootBracketError,
    SolverError,
    UnsupportedVariantError,
)
from .moments import (
    DiscreteDistribution,
    MomentVector,
    alpha,
    central_to_raw,
    double_factorial,
    gaussian_penalty_expectation,
    raw_to_central,
)
from .objectives import (
    AmbiguousCos,
    CosPenalty,
    CoshPenalty,
    ExpPenalty,
    FourierEvenPenalty,
    MomentCombo,
    ObjectiveSpec,
    StandardizedMoments,
    curvature_sum,
    psi,
    psi_grad_even,
)
from .verify import (
    DeterministicControl,
    evaluate_deterministic,
    fbsde_diagonal_check,
    monte_carlo,
    pde_residual_check,
    spike_test,
    value_consistency_check,
    verification_report,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousCos",
    "CoefficientError",
    "CoefficientSet",
    "ConcavityError",
    "ConfigError",
    "ConstantCoefficient",
    "CosDomainError",
    "CosPenalty",
    "CoshPenalty",
    "DeterministicControl",
    "DiscountCache",
    "DiscreteDistribution",
    "DomainError",
    "EquicontrolError",
    "EquilibriumSolution",
    "ExpPenalty",
    "ExponentialCoefficient",
    "FourierEvenPenalty",
    "GridMismatchError",
    "MomentCombo",
    "MomentVector",
    "ObjectiveError",
    "ObjectiveSpec",
    "OdeStepError",
    "PolynomialCoefficient",
    "QuadratureError",
    "RootBracketError",
    "SampledCoefficient",
    "SolverError",
    "StandardizedMoments",
    "TimeGrid",
    "UnsupportedVariantError",
    "alpha",
    "big_theta",
    "central_to_raw",
    "curvature_sum",
    "double_factorial",
    "evaluate_deterministic",
    "fbsde_diagonal_check",
    "gaussian_penalty_expectation",
    "integrate",
    "monte_carlo",
    "pde_residual_check",
    "psi",
    "psi_grad_even",
    "raw_to_central",
    "solve",
    "solve_algebraic",
    "solve_closed_form",
    "solve_ode",
    "spike_test",
    "theta",
    "value_consistency_check",
    "verification_report",
    "y_from_beta",
]
