"""Exception hierarchy shared by all modules."""


class NocError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(NocError, ValueError):
    """Bad parameters, unknown presets, or mismatched inputs."""


class ConstraintViolation(NocError, ValueError):
    """A topology breaks a structural constraint (budget, degree, connectivity)."""


class PreconditionError(NocError, ValueError):
    """An operation was called on an input it is not defined for."""


class SchemeMismatchError(PreconditionError):
    """A routing scheme was applied to a topology it cannot route."""


class ValidationError(NocError, ValueError):
    """Data failed a validation check (negative rates, unknown routers...)."""


class TraceParseError(ValidationError):
    """A trace file row could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProtocolError(NocError, RuntimeError):
    """The wireless MAC was driven outside its protocol."""
