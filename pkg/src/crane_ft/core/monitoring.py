"""Monitoring and metrics."""

from pathlib import Path

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    write_to_textfile,
)

from crane_ft.core.config import settings

# Private registry so repeated runs in one process never clash
registry = CollectorRegistry()

kernel_solves_total = Counter(
    "kernel_solves_total",
    "Total kernel solves",
    ["kernel", "method"],
    registry=registry,
)

kernel_solve_duration_seconds = Histogram(
    "kernel_solve_duration_seconds",
    "Kernel solve duration in seconds",
    ["kernel"],
    registry=registry,
)

picard_iterations_total = Counter(
    "picard_iterations_total",
    "Fixed-point sweeps performed by the kernel oracle",
    registry=registry,
)

implicit_steps_total = Counter(
    "implicit_steps_total",
    "Implicit integrator steps",
    ["solver"],  # fixed_point, polar or origin
    registry=registry,
)

simulation_steps_total = Counter(
    "simulation_steps_total",
    "Closed-loop time steps",
    registry=registry,
)

numerical_failures_total = Counter(
    "numerical_failures_total",
    "Numerical failures by error code",
    ["code"],
    registry=registry,
)

settling_time_seconds = Gauge(
    "settling_time_seconds",
    "Detected settling times",
    ["kind"],  # phi or platform
    registry=registry,
)


def record_kernel_solve(kernel: str, method: str, duration: float) -> None:
    """Record one kernel solve."""
    kernel_solves_total.labels(kernel=kernel, method=method).inc()
    kernel_solve_duration_seconds.labels(kernel=kernel).observe(duration)


def record_implicit_step(solver: str) -> None:
    """Record one implicit integrator step."""
    implicit_steps_total.labels(solver=solver).inc()


def record_failure(code: str) -> None:
    """Record a numerical failure."""
    numerical_failures_total.labels(code=code).inc()


def record_settling(kind: str, value: float | None) -> None:
    """Record a settling time; NaN when it was never reached."""
    settling_time_seconds.labels(kind=kind).set(
        float("nan") if value is None else value
    )


def write_metrics(output_dir: Path) -> Path | None:
    """Write the registry in text exposition format next to the results."""
    if not settings.PROMETHEUS_ENABLED:
        return None
    path = Path(output_dir) / "metrics.prom"
    write_to_textfile(str(path), registry)
    return path
