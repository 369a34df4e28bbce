"""
Reduction engine: gauge-reduced Lagrange-Poincare mechanics on P x V.
"""

from .bundle import ModelSpec, geometry_point, invariant_coordinates
from .checks import CheckEntry, CheckReport
from .christoffel import identity_suite, lowered_christoffels, raised_christoffels
from .dynamics import (
    FullState,
    ReducedState,
    ReducedSystem,
    energy,
    full_energy,
    full_rhs,
    initial_lift,
    lagrangian_rhs,
    project_full_state,
    reduced_rhs,
)
from .errors import (
    DegeneracyError,
    DomainError,
    GaugeTransversalityError,
    ModelNotFoundError,
    OutOfChartError,
    ParameterError,
    ReductionError,
    ShapeError,
    StiffnessError,
)
from .gaugefield import connection, covariant_derivative_d, curvature
from .models import MODEL_REGISTRY, instantiate

__version__ = "0.1.0"

__all__ = [
    "CheckEntry",
    "CheckReport",
    "DegeneracyError",
    "DomainError",
    "FullState",
    "GaugeTransversalityError",
    "MODEL_REGISTRY",
    "ModelNotFoundError",
    "ModelSpec",
    "OutOfChartError",
    "ParameterError",
    "ReducedState",
    "ReducedSystem",
    "ReductionError",
    "ShapeError",
    "StiffnessError",
    "connection",
    "covariant_derivative_d",
    "curvature",
    "energy",
    "full_energy",
    "full_rhs",
    "geometry_point",
    "identity_suite",
    "initial_lift",
    "instantiate",
    "invariant_coordinates",
    "lagrangian_rhs",
    "lowered_christoffels",
    "project_full_state",
    "raised_christoffels",
    "reduced_rhs",
]
