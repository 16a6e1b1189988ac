"""Exception hierarchy.

Validation problems (bad inputs, violated preconditions) derive from
:class:`ValidationError`; numerical failures derive from :class:`SolverError`.
The command line maps the two families to different exit codes.
"""


class OtlabError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(OtlabError, ValueError):
    """Input does not satisfy a documented precondition."""


class SolverError(OtlabError, RuntimeError):
    """A numerical routine failed to deliver its postcondition."""


class MeshMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class FloorError(ValidationError):
    pass


class ExponentError(ValidationError):
    pass


class DegenerateEps(ValidationError):
    pass


class MassError(ValidationError):
    pass


class SizeCap(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class KindError(ValidationError):
    pass


class IncompleteInput(ValidationError):
    pass


class MeanError(ValidationError):
    pass


class IncompatibleData(ValidationError):
    pass


class ConvexityError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class IoError(OtlabError, OSError):
    pass


class NoConvergence(SolverError):
    """Iteration cap reached; ``violation`` holds the last measured error."""

    def __init__(self, message, violation=float("nan")):
        super().__init__(message)
        self.violation = violation


class UnmappedPoint(SolverError):
    pass
