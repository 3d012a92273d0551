"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: configuration/domain problems exit 1,
numerical failures exit 2.
"""


class CorrsenseError(Exception):
    """Base class for all package errors."""


class DomainError(CorrsenseError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigurationError(CorrsenseError, ValueError):
    """A configuration value, file, or tag is malformed or unknown."""

    def __init__(self, message, *, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericalError(CorrsenseError, RuntimeError):
    """An iterative method failed to produce a trustworthy number."""


class ConvergenceError(NumericalError):
    """Iteration limit reached; ``estimate`` carries the last iterate."""

    def __init__(self, message, estimate=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations
