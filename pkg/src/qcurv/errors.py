"""Exception hierarchy shared by all qcurv modules."""


class QcurvError(Exception):
    """Base class for library errors."""


class DimensionError(QcurvError, ValueError):
    """Shapes or tensor-factor dimensions do not match."""


class PreconditionError(QcurvError, ValueError):
    """An input violates a documented precondition."""


class SolverError(QcurvError, RuntimeError):
    """The conic solver could not produce a usable iterate.

    ``diagnostics`` carries the last residuals so callers can report them.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedStructure(QcurvError):
    """The requested analysis is not defined for this kind of input."""


class InfiniteMetricError(QcurvError, ValueError):
    """A quadratic form would be infinite (input outside the range)."""


class SpecError(QcurvError, ValueError):
    """Invalid JSON experiment or channel file.

    ``pointer`` is a JSON pointer (RFC 6901) to the offending location.
    """

    def __init__(self, pointer, message):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
