"""Unit tests for structured logging helpers."""

import numpy as np
import pytest

from crane_ft.core.config import settings
from crane_ft.core.exceptions import DivergenceError
from crane_ft.core.logging import (
    add_run_context,
    log_error,
    log_stage,
    numpy_to_builtin,
)

pytestmark = pytest.mark.unit


class TestProcessors:
    """Test the custom structlog processors."""

    def test_run_context(self):
        """Test app name and mode are attached."""
        event = add_run_context(None, "info", {"event": "x"})
        assert event["app_name"] == settings.APP_NAME
        assert event["mode"] in ("debug", "batch")

    def test_numpy_values_become_builtins(self):
        """Test scalars, arrays and nested containers are converted."""
        event = numpy_to_builtin(
            None,
            "info",
            {
                "event": "gains",
                "mu": np.float64(2.379),
                "steps": np.int64(600),
                "a": np.array([0.5, 1.0]),
                "nested": {"n": np.int32(3), "pair": (np.float32(0.5), 1)},
            },
        )
        assert event["mu"] == 2.379 and type(event["mu"]) is float
        assert event["steps"] == 600 and type(event["steps"]) is int
        assert event["a"] == [0.5, 1.0]
        assert event["nested"] == {"n": 3, "pair": [0.5, 1]}
        assert event["event"] == "gains"


class TestLogError:
    """Test error logging."""

    def test_crane_error_carries_code(self, mocker):
        """Test the error type, message and code are recorded."""
        mock_logger = mocker.patch("crane_ft.core.logging.logger")
        log_error(DivergenceError("blew up"), {"kernel": "K"})
        mock_logger.error.assert_called_once_with(
            "error_occurred",
            error_type="DivergenceError",
            error_message="blew up",
            context={"kernel": "K"},
            code="DIVERGENCE",
        )

    def test_plain_exception(self, mocker):
        """Test other exceptions are logged without a code."""
        mock_logger = mocker.patch("crane_ft.core.logging.logger")
        log_error(ValueError("bad"))
        mock_logger.error.assert_called_once_with(
            "error_occurred",
            error_type="ValueError",
            error_message="bad",
            context={},
        )


class TestLogStage:
    """Test stage timing."""

    def test_start_and_finish(self, mocker):
        """Test both events are emitted with extra fields on the closing one."""
        mock_logger = mocker.patch("crane_ft.core.logging.logger")
        with log_stage("kernels", n=50) as extra:
            extra["mu"] = 2.38
        start, finish = mock_logger.info.call_args_list
        assert start.args == ("stage_started",)
        assert start.kwargs == {"stage": "kernels", "n": 50}
        assert finish.args == ("stage_finished",)
        assert finish.kwargs["mu"] == 2.38
        assert finish.kwargs["seconds"] >= 0.0

    def test_finish_logged_on_error(self, mocker):
        """Test the closing event is emitted when the stage raises."""
        mock_logger = mocker.patch("crane_ft.core.logging.logger")
        with pytest.raises(DivergenceError):
            with log_stage("simulate"):
                raise DivergenceError()
        assert mock_logger.info.call_args_list[-1].args == ("stage_finished",)
