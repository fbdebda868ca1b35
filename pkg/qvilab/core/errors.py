"""Exception hierarchy for qvilab."""

from typing import Any, Iterable, Optional


class QVIError(Exception):
    """Base class for every domain failure raised by the lab."""

    #: short check name used in ``FAIL <check> <detail>`` lines
    check = "qvi"


class StepConvergenceError(QVIError):
    """An inner fixed-point loop of a backward step missed its tolerance."""

    check = "step"

    def __init__(self, message: str, t: float, iterations: int, residual: float):
        super().__init__(message)
        self.t = t
        self.iterations = iterations
        self.residual = residual


class PicardDivergenceError(QVIError):
    """Picard iteration hit kmax before reaching the tolerance."""

    check = "picard"

    def __init__(self, message: str, trace: Any):
        super().__init__(message)
        self.trace = trace


class LoopBudgetError(QVIError):
    """Impulse-chain enumeration would exceed the configured budget."""

    check = "no_free_loop"

    def __init__(self, message: str, chains: int, budget: int):
        super().__init__(message)
        self.chains = chains
        self.budget = budget


class GridMismatchError(QVIError):
    """Two fields (or a field and a grid) do not share a discretization."""

    check = "grid"


class PathExclusionError(QVIError):
    """Too many simulated paths left the grid box."""

    check = "consistency"

    def __init__(self, message: str, fraction: float):
        super().__init__(message)
        self.fraction = fraction


class ConfigError(QVIError):
    """Malformed model document."""

    check = "config"

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class DimensionMismatchError(ConfigError):
    """An expression or list does not match the declared dimension."""


class ExprSyntaxError(QVIError):
    """Expression text could not be parsed."""

    check = "expr"

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownIdentifierError(ExprSyntaxError):
    """Expression references a name that is neither a variable nor a function."""

    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier '{name}'", offset)


class ExprEvalError(QVIError):
    """Domain error while evaluating an expression."""

    check = "expr"

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression
