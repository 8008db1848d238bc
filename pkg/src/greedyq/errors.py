"""Exception types shared across the package."""


class GreedyQError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(GreedyQError, ValueError):
    """A caller-supplied argument violates a documented precondition."""


class ParseError(GreedyQError, ValueError):
    """An input file is malformed.  Carries the offending line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        loc = f"{path}:{line}: " if path else (f"line {line}: " if line else "")
        super().__init__(loc + message)
        self.path = path
        self.line = line


class SizeLimitError(ArgumentError):
    """An exact solver was handed an instance above its node limit."""


class InfeasibleError(GreedyQError, ValueError):
    """The requested structure does not exist (e.g. an uncoverable universe)."""


class TrainingError(GreedyQError, RuntimeError):
    """Training diverged (non-finite loss or parameters)."""
