"""Unit tests for custom exceptions."""

import pytest

from crane_ft.core.exceptions import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_FAILURE,
    ConfigurationError,
    ConvergenceError,
    CraneError,
    DegenerateCaseError,
    DivergenceError,
    DomainError,
    HistoryLookupError,
    NonConvergenceError,
    NumericalError,
    ShapeError,
    UndefinedNormError,
    ValidationError,
)

pytestmark = pytest.mark.unit


class TestCraneError:
    """Test CraneError base class."""

    def test_crane_error_creation(self):
        """Test creating a base error."""
        exc = CraneError(message="Test error", code="TEST_ERROR")
        assert exc.message == "Test error"
        assert exc.code == "TEST_ERROR"
        assert exc.exit_code == EXIT_NUMERICAL_FAILURE

    def test_crane_error_with_custom_exit_code(self):
        """Test base error with a custom exit code."""
        exc = CraneError("Custom error", exit_code=EXIT_CONFIG_ERROR)
        assert exc.exit_code == 2

    def test_crane_error_with_details(self):
        """Test base error with details."""
        details = {"field": "dt"}
        exc = CraneError("Error with details", details=details)
        assert exc.details == details

    def test_details_default_to_empty_dict(self):
        """Test details are never None."""
        assert CraneError("x").details == {}


class TestSpecificExceptions:
    """Test specific exception classes."""

    @pytest.mark.parametrize(
        "cls, code, exit_code",
        [
            (DomainError, "DOMAIN_ERROR", 3),
            (ShapeError, "SHAPE_ERROR", 3),
            (ConfigurationError, "CONFIG_ERROR", 2),
            (ValidationError, "VALIDATION_ERROR", 2),
            (NumericalError, "NUMERICAL_ERROR", 3),
            (DivergenceError, "DIVERGENCE", 3),
            (ConvergenceError, "CONVERGENCE", 3),
            (NonConvergenceError, "NON_CONVERGENCE", 3),
            (UndefinedNormError, "UNDEFINED_NORM", 3),
            (DegenerateCaseError, "DEGENERATE_CASE", 3),
            (HistoryLookupError, "HISTORY_LOOKUP", 3),
        ],
    )
    def test_codes_and_exit_codes(self, cls, code, exit_code):
        """Test every error carries its code and exit status."""
        exc = cls()
        assert exc.code == code
        assert exc.exit_code == exit_code
        assert isinstance(exc, CraneError)

    def test_numerical_errors_share_a_base(self):
        """Test numerical failures can be caught together."""
        for cls in (DivergenceError, ConvergenceError, NonConvergenceError):
            assert issubclass(cls, NumericalError)

    def test_non_convergence_carries_residual(self):
        """Test NonConvergenceError keeps its last residual."""
        exc = NonConvergenceError(last_residual=1e-3, details={"dt": 0.01})
        assert exc.last_residual == 1e-3
        assert exc.details == {"last_residual": 1e-3, "dt": 0.01}

    def test_exception_str_representation(self):
        """Test string representation of exceptions."""
        exc = ConfigurationError("nu2: nu2 must lie in (0,1)")
        assert str(exc) == "nu2: nu2 must lie in (0,1)"

    def test_exception_defaults(self):
        """Test exceptions with default messages."""
        assert DomainError().message == "Argument outside the admissible domain"
        assert DivergenceError().message == "Kernel sweep diverged"
        assert UndefinedNormError().message == (
            "Homogeneous norm is undefined at the origin"
        )

    def test_repr_names_class_and_code(self):
        """Test repr shows the class, code and message."""
        exc = DivergenceError("kernel iterate exceeded 1e6")
        assert repr(exc) == "DivergenceError(DIVERGENCE: 'kernel iterate exceeded 1e6')"
