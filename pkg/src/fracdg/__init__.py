"""DG time stepping for time-fractional diffusion.

Piecewise-constant discontinuous Galerkin in time combined with P1 finite
elements in space for :math:`\\partial_t u - \\partial_t^{1-\\alpha}\\Delta u = f`,
together with the fractional-calculus primitives, Mittag-Leffler evaluation,
reference solutions and error norms needed to measure its convergence.
"""

from .dg import (
    DGSolution,
    DiracSource,
    InitialCoefficients,
    InitialDirac,
    InitialFunction,
    PowerLaw,
    ProblemData,
    SeparableSource,
    SpaceTimeSource,
    TimeFunction,
    ZeroInitial,
    ZeroSource,
    solve,
)
from .errors import (
    AssemblyError,
    DataError,
    DomainError,
    FracDGError,
    SingularityError,
    SolverError,
)
from .fem import (
    FemSpace,
    LocalDirac,
    Mesh,
    assemble,
    build_interval_mesh,
    build_square_mesh,
    dirac_approx,
    interpolate,
    l2_project,
    load_slab,
    load_vector,
)
from .frac_ops import (
    ScalarStepFunction,
    TimeGrid,
    WeightTable,
    convolution_weights,
    frac_integral_quadrature,
    hgamma_seminorm,
    rl_derivative_step,
    rl_integral_step,
)
from .metrics import (
    ErrorReport,
    e1_l2l2,
    e2_fractional,
    interpolate_left,
    interpolate_right,
    nodal_error,
    observed_orders,
)
from .mittag_leffler import MLQuery, ml_neg, mode_solution
from .reference import (
    FineReference,
    SpectralBasis1D,
    SpectralReference,
    fine_reference,
    spectral_f0,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "DGSolution",
    "DataError",
    "DiracSource",
    "DomainError",
    "ErrorReport",
    "FemSpace",
    "FineReference",
    "FracDGError",
    "InitialCoefficients",
    "InitialDirac",
    "InitialFunction",
    "LocalDirac",
    "MLQuery",
    "Mesh",
    "PowerLaw",
    "ProblemData",
    "ScalarStepFunction",
    "SeparableSource",
    "SingularityError",
    "SolverError",
    "SpaceTimeSource",
    "SpectralBasis1D",
    "SpectralReference",
    "TimeFunction",
    "TimeGrid",
    "WeightTable",
    "ZeroInitial",
    "ZeroSource",
    "assemble",
    "build_interval_mesh",
    "build_square_mesh",
    "convolution_weights",
    "dirac_approx",
    "e1_l2l2",
    "e2_fractional",
    "fine_reference",
    "frac_integral_quadrature",
    "hgamma_seminorm",
    "interpolate",
    "interpolate_left",
    "interpolate_right",
    "l2_project",
    "load_slab",
    "load_vector",
    "ml_neg",
    "mode_solution",
    "nodal_error",
    "observed_orders",
    "rl_derivative_step",
    "rl_integral_step",
    "solve",
    "spectral_f0",
]
