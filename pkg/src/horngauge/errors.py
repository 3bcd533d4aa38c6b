"""Exception hierarchy.

Input errors (bad polynomial, bad weights, bad arc) map to CLI exit code 2,
numeric failures (flows, tracing, fits) to exit code 3.
"""


class HorngaugeError(Exception):
    """Base class for all package errors."""


class InputError(HorngaugeError, ValueError):
    """The caller supplied data that violates a documented precondition."""


class NumericError(HorngaugeError, ArithmeticError):
    """A numeric stage failed (flow, continuation, fit)."""


class WeightError(InputError):
    pass


class DegreeConflict(InputError):
    pass


class EmptyHomogeneousPart(InputError):
    pass


class ArcNotOnVariety(InputError):
    pass


class SingularGradient(NumericError):
    pass


class SingularField(NumericError):
    pass


class StepLimit(NumericError):
    pass


class StartPointNotFound(NumericError):
    pass


class BranchJump(NumericError):
    pass


class NoClosure(NumericError):
    pass


class InsufficientSamples(NumericError):
    pass


class NoValidFit(NumericError):
    pass
