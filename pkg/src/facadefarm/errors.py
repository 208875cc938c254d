"""Exception hierarchy shared across the package.

The CLI maps :class:`InputError` subclasses to exit code 2 and
:class:`ComputationError` to exit code 3.
"""


class FacadeFarmError(Exception):
    pass


class InputError(FacadeFarmError, ValueError):
    """Bad caller-supplied data (violated precondition, malformed file)."""


class GeometryError(InputError):
    pass


class ParseError(InputError):
    """A file could not be parsed; carries the offending 1-based line number."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class UnknownSkytypeError(InputError):
    pass


class GapError(InputError):
    """A sensor log is missing samples inside the requested window."""

    def __init__(self, message, missing=()):
        self.missing = list(missing)
        super().__init__(message)


class EmptyDatabaseError(InputError):
    pass


class UndefinedCorrelationError(InputError):
    pass


class ComputationError(FacadeFarmError, RuntimeError):
    pass
