"""Exception hierarchy shared by every module of the package."""


class CuboidLayoutError(Exception):
    """Base class for all domain errors raised by this package."""


class ObjParseError(CuboidLayoutError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshIndexError(CuboidLayoutError, IndexError):
    pass


class DegenerateGeometryError(CuboidLayoutError, ValueError):
    pass


class NotNormalizedError(CuboidLayoutError, ValueError):
    pass


class PreconditionError(CuboidLayoutError, ValueError):
    pass


class ValidationError(CuboidLayoutError, ValueError):
    """Schema or invariant violation; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class UndefinedMetricError(CuboidLayoutError, ValueError):
    pass


class EmptyClassError(CuboidLayoutError, LookupError):
    pass


class FitError(CuboidLayoutError, ValueError):
    pass


class SamplingError(CuboidLayoutError, RuntimeError):
    pass


class AcceptanceShortfall(CuboidLayoutError, RuntimeError):
    """Raised when a rejection round accepts too few candidates.

    Carries the last model that was successfully refit and the round reports
    produced so far (the failing round included).
    """

    def __init__(self, message, model, reports):
        super().__init__(message)
        self.model = model
        self.reports = reports
