"""Piecewise-linear angular moment models: bases, minimum-entropy closures,
realizability tests and approximation studies in slab geometry and on the
unit sphere."""

from .bases import (AngularBasis, Family, MomentVector, dimension, evaluate, isotropic_moment,
                    model_name, parse_model, real_spherical_harmonics)
from .closure import (ClosureError, DomainViolation, EntropyFamily, MaxIterations,
                      SingularHessian, SingularMassMatrix, SolverConfig, linear_closure,
                      solve_dual)
from .geometry import (Partition1D, SphericalTriangle, SphericalTriangulation,
                       equidistant_partition, sphere_triangulation)
from .quadrature import QuadratureRule, gauss_lobatto
from .realizability import RealizabilityVerdict, Status, check, numerically_realizable

__version__ = "0.1.0"

__all__ = [
    "AngularBasis", "Family", "MomentVector", "dimension", "evaluate", "isotropic_moment",
    "model_name", "parse_model", "real_spherical_harmonics",
    "ClosureError", "DomainViolation", "EntropyFamily", "MaxIterations", "SingularHessian",
    "SingularMassMatrix", "SolverConfig", "linear_closure", "solve_dual",
    "Partition1D", "SphericalTriangle", "SphericalTriangulation", "equidistant_partition",
    "sphere_triangulation", "QuadratureRule", "gauss_lobatto",
    "RealizabilityVerdict", "Status", "check", "numerically_realizable",
]
