"""Exception hierarchy shared by all modules."""


class ModRelayError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ModRelayError, ValueError):
    """An object violates one of its invariants."""


class DomainError(ModRelayError, ValueError):
    """A scalar argument lies outside its mathematical domain."""


class SpecParseError(ModRelayError, ValueError):
    """A channel spec document could not be parsed."""

    def __init__(self, message, line=None, column=None, field=None):
        self.line = line
        self.column = column
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class GuardError(ModRelayError, ValueError):
    """A computation was refused because its cost guard would be exceeded."""


class ConvergenceError(ModRelayError, RuntimeError):
    """An iterative solver hit its iteration cap; carries the last iterate."""

    def __init__(self, message, last_iterate=None, gap=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gap = gap


class InfeasibleQuantizerError(ModRelayError, ValueError):
    """A quantizer exceeds the relay-link rate budget."""


class VerificationError(ModRelayError, AssertionError):
    """An identity that must hold numerically did not."""
