"""Errors raised by the crane-ft library and mapped to CLI exit statuses.

Each error class fixes a machine-readable ``code`` and an ``exit_code``;
instances may override the message and attach structured ``details``
that end up in the error log.
"""

from typing import Any, ClassVar, Dict, Optional

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class CraneError(Exception):
    """Base crane-ft exception."""

    default_message: ClassVar[str] = "crane-ft failure"
    default_code: ClassVar[str] = "CRANE_ERROR"
    default_exit_code: ClassVar[int] = EXIT_NUMERICAL_FAILURE

    def __init__(
        self,
        message: Optional[str] = None,
        code: Optional[str] = None,
        exit_code: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.message = message if message is not None else self.default_message
        self.code = code or self.default_code
        self.exit_code = exit_code if exit_code is not None else self.default_exit_code
        self.details = dict(details) if details else {}
        super().__init__(self.message)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.code}: {self.message!r})"


class DomainError(CraneError):
    """Coordinate outside its admissible interval."""

    default_message = "Argument outside the admissible domain"
    default_code = "DOMAIN_ERROR"


class ShapeError(CraneError):
    """Fields sampled on mismatching grids."""

    default_message = "Field shapes do not match the grid"
    default_code = "SHAPE_ERROR"


class ConfigurationError(CraneError):
    default_message = "Invalid configuration"
    default_code = "CONFIG_ERROR"
    default_exit_code = EXIT_CONFIG_ERROR


class ValidationError(CraneError):
    """Initial data violating a compatibility identity."""

    default_message = "Validation failed"
    default_code = "VALIDATION_ERROR"
    default_exit_code = EXIT_CONFIG_ERROR


class NumericalError(CraneError):
    """Base class for numerical failures; all exit with status 3."""

    default_message = "Numerical failure"
    default_code = "NUMERICAL_ERROR"


class DivergenceError(NumericalError):
    """Kernel sweep growing beyond the sanity bound."""

    default_message = "Kernel sweep diverged"
    default_code = "DIVERGENCE"


class ConvergenceError(NumericalError):
    """Fixed-point iteration exhausted its iteration budget."""

    default_message = "Iteration did not converge"
    default_code = "CONVERGENCE"


class NonConvergenceError(NumericalError):
    """Implicit step failed to solve its defining relation.

    ``last_residual`` is kept as an attribute and copied into ``details``.
    """

    default_message = "Implicit step did not converge"
    default_code = "NON_CONVERGENCE"

    def __init__(
        self,
        message: Optional[str] = None,
        last_residual: float = float("nan"),
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.last_residual = last_residual
        super().__init__(
            message, details={"last_residual": last_residual, **(details or {})}
        )


class UndefinedNormError(NumericalError):
    """Homogeneous norm requested at the origin."""

    default_message = "Homogeneous norm is undefined at the origin"
    default_code = "UNDEFINED_NORM"


class DegenerateCaseError(NumericalError):
    default_message = "Degenerate case"
    default_code = "DEGENERATE_CASE"


class HistoryLookupError(NumericalError):
    """Time argument outside a recorded trajectory."""

    default_message = "Time outside the recorded history"
    default_code = "HISTORY_LOOKUP"
