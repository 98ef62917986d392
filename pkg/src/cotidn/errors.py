"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class CotIdnError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CotIdnError, ValueError):
    """An input lies outside the domain of an operation."""


class GridTooLarge(DomainError):
    def __init__(self, size: int, limit: int) -> None:
        super().__init__(f"oracle grid has {size} evaluations, limit is {limit}")
        self.size = size
        self.limit = limit


class UnrecognizedIntent(CotIdnError):
    """No objective keyword matched; the parser refuses to guess."""


class TransportError(CotIdnError):
    """A remote endpoint failed or could not be reached."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 1) -> None:
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class BackendTimeout(TransportError):
    pass


class MalformedReply(CotIdnError):
    """A backend reply carried no fenced strategy block."""


class ParseError(CotIdnError):
    """The strategy block is not a JSON object."""


class ValidationError(CotIdnError):
    """A parsed command violates its schema or the scenario bounds."""

    def __init__(self, field: str, message: str = "") -> None:
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field


class ConfigError(CotIdnError):
    pass


class InvariantViolation(CotIdnError):
    pass
