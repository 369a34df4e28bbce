"""Exception hierarchy for the reduction engine."""


class ReductionError(Exception):
    """Base class for every error raised by the engine."""


class ShapeError(ReductionError, ValueError):
    """Array argument has the wrong shape."""


class ParameterError(ReductionError, ValueError):
    """Numeric parameter outside its admissible range."""


class ModelNotFoundError(ReductionError, KeyError):
    """Unknown built-in model id."""


class DomainError(ReductionError):
    """Point lies outside the declared domain of a map."""


class OutOfChartError(DomainError):
    """Group chart cap exceeded or invariant-coordinate Newton failed."""


class DegeneracyError(DomainError):
    """Orbit metric or block metric singular at the evaluation point."""


class GaugeTransversalityError(DomainError):
    """Gauge functions are not transversal to the orbits (Phi singular)."""


class StiffnessError(ReductionError):
    """Adaptive integrator step size underflow."""
