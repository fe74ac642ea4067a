"""Global test configuration and fixtures."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from crane_ft.cli.pipeline import KernelStage, build_config, compute_kernels
from crane_ft.control.crane_model import CraneModel, CraneParams
from crane_ft.control.kernel_engine import (
    DIRECT_LABELS,
    INVERSE_LABELS,
    KernelSet,
    TriangularGrid,
)
from crane_ft.core.config import RunConfig


@pytest.fixture(scope="session")
def params() -> CraneParams:
    """Reference physical parameters and exponents."""
    return CraneParams()


@pytest.fixture(scope="session")
def model(params: CraneParams) -> CraneModel:
    """Crane model for the reference parameters."""
    return CraneModel(params)


@pytest.fixture(scope="session")
def coarse_config() -> RunConfig:
    """Reference parameters on a coarse kernel grid."""
    return build_config(kernel_n=50, t_end=1.0)


@pytest.fixture(scope="session")
def coarse_stage(coarse_config: RunConfig) -> KernelStage:
    """Kernels and gains on a 50-interval grid, shared by the session."""
    return compute_kernels(coarse_config)


@pytest.fixture(scope="session")
def reference_stage() -> KernelStage:
    """Kernels and gains at the reference resolution."""
    return compute_kernels(build_config())


@pytest.fixture
def zero_kernels() -> Callable[[int, str], KernelSet]:
    """Factory for identically zero kernel sets."""

    def make(n: int, family: str = "inverse") -> KernelSet:
        labels = INVERSE_LABELS if family == "inverse" else DIRECT_LABELS
        grid = TriangularGrid(n)
        return KernelSet(grid, {k: np.zeros((n + 1, n + 1)) for k in labels})

    return make


@pytest.fixture
def config_file(tmp_path: Path) -> Callable[[str], Path]:
    """Write a configuration file and return its path."""

    def write(text: str) -> Path:
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return path

    return write
