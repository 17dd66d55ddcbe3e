"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class UnipriceError(Exception):
    """Base class for all library errors."""


class InputError(UnipriceError, ValueError):
    """Malformed arguments: wrong lengths, bad signs, empty budgets."""


class ConfigError(InputError):
    """A scenario/config file or type-bound box is invalid.

    ``field`` names the offending key when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class MessageSpaceError(InputError):
    """A report lies outside the message space (the type-bound box)."""

    def __init__(self, message: str, agent_index: int):
        super().__init__(f"agent {agent_index}: {message}")
        self.agent_index = agent_index


class SolverError(UnipriceError, RuntimeError):
    """A numerical routine failed to converge or certify its answer."""

    def __init__(self, message: str, residual: float = float("nan"), trace=None):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
        self.trace = list(trace) if trace is not None else []


class InfeasibleError(UnipriceError):
    """No feasible point exists; ``periods`` lists the violating periods."""

    def __init__(self, message: str, periods=()):
        super().__init__(message)
        self.periods = tuple(periods)


class SizeError(InputError):
    """Problem too large for an exhaustive routine."""
