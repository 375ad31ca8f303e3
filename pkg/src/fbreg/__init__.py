"""Solver and regularity harness for the free boundary problem F(D^2u) = 1 in Omega."""
from .grid import Grid2, ScalarField, discrete_hessian
from .operators import (
    EllipticityPair,
    OperatorSpec,
    SymMat,
    eval_operator,
    gamma_for_direction,
    project_to_level_set,
    pucci_minus,
    pucci_plus,
)
from .solver import (
    InvalidBoundary,
    NonConvergence,
    ObstacleProblemSpec,
    Solution,
    boundary_field,
    extract_free_boundary,
    radial_oracle,
    residual,
    solve,
)

__version__ = "0.1.0"
