"""Exception hierarchy.

The CLI maps these onto exit codes: schema-type failures exit 2, missing
users or records exit 3, bad configuration exits 4.
"""


class ContagionError(Exception):
    """Base class for all package errors."""


class SchemaError(ContagionError):
    """A record violates the file schema or a domain-type invariant."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ParseError(SchemaError):
    """A record could not be decoded at all."""


class DataError(SchemaError):
    """A well-formed record carries inconsistent values (negative age, out of window)."""


class ConflictError(SchemaError):
    """Duplicate keys where uniqueness is required."""


class RangeError(ContagionError, ValueError):
    """A numeric argument lies outside its admissible range."""


class NotFoundError(ContagionError, LookupError):
    """A requested user, video, or profile does not exist."""


class ShapeError(ContagionError, ValueError):
    """Array dimensions, topic sets, or windows do not line up."""


class DegenerateInputError(ContagionError, ValueError):
    """Input has no usable variation (constant vector, empty list)."""


class DomainError(ContagionError, ValueError):
    """Value outside the mathematical domain of an operator."""


class ParameterError(ContagionError, ValueError):
    """Numerical parameter would make an algorithm unstable."""


class DegenerateScenarioError(ContagionError):
    """A scenario corpus produced a zero baseline."""


class ConfigError(ContagionError, ValueError):
    """Invalid generator or command configuration."""
