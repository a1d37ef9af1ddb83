"""Exception hierarchy. Every error records the module it was raised from."""

from typing import Optional


class FoodRescueError(Exception):
    """Base error carrying the failing module name."""

    def __init__(self, module: str, message: str):
        super().__init__(message)
        self.module = module
        self.message = message

    @property
    def kind(self) -> str:
        return type(self).__name__

    def diagnostic(self) -> str:
        """Single-line, machine-parseable form: `<module>: <kind>: <message>`."""
        text = " ".join(self.message.split())
        return f"{self.module}: {self.kind}: {text}"


class DomainError(FoodRescueError):
    """Argument outside the mathematical domain of an operation."""


class MeanUndefinedError(DomainError):
    """GPD mean requested for shape >= 1."""


class ConfigurationError(FoodRescueError):
    """Inconsistent or incomplete run configuration."""


class ContractError(FoodRescueError):
    """Caller broke an operation's precondition (lengths, ids)."""


class SizeError(FoodRescueError):
    """Problem too large for the requested method."""


class InsufficientDataError(FoodRescueError):
    """Too few observations for a fit."""


class DegenerateDataError(FoodRescueError):
    """Observations carry no information for a fit (for example zero variance)."""


class NonConvergenceError(FoodRescueError):
    """Optimizer stopped at its iteration cap. `best` holds the best point found."""

    def __init__(self, module: str, message: str, best: Optional[object] = None):
        super().__init__(module, message)
        self.best = best


class ReferentialError(FoodRescueError):
    """An id referenced in one input is missing from another."""

    def __init__(self, module: str, message: str, missing_id: Optional[str] = None):
        super().__init__(module, message)
        self.missing_id = missing_id


class InvariantError(FoodRescueError):
    """An internal accounting invariant failed (a bug, not bad input)."""


class ParseError(FoodRescueError):
    """Malformed input file."""

    def __init__(self, module: str, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = path or "<input>"
        if line is not None:
            location = f"{location}:{line}"
        super().__init__(module, f"{location}: {message}")
        self.path = path
        self.line = line
