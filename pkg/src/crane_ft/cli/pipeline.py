"""Configuration loading and the kernels -> gains -> simulation pipeline."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from crane_ft.control.closed_loop import (
    ClosedLoopSimulator,
    InitialData,
    SimulationResult,
)
from crane_ft.control.crane_model import CraneModel
from crane_ft.control.kernel_engine import (
    GainProfile,
    KernelSet,
    TriangularGrid,
    coefficient_functions,
    compute_gains,
    invert_kernels_volterra,
    solve_direct_kernels,
    solve_inverse_kernels_goursat,
)
from crane_ft.core.config import RunConfig, settings
from crane_ft.core.exceptions import ConfigurationError
from crane_ft.core.logging import log_stage, logger
from crane_ft.core.monitoring import write_metrics
from crane_ft.core.utils import read_profile, write_csv


def _parse_lines(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigurationError(
                f"line {number}: expected 'key = value', got {raw.strip()!r}",
                details={"line": number},
            )
        if key in values:
            raise ConfigurationError(
                f"line {number}: duplicate key {key!r}",
                details={"line": number, "field": key},
            )
        values[key] = value
    return values


def _first_error(exc: PydanticValidationError) -> ConfigurationError:
    error = exc.errors()[0]
    field_name = ".".join(str(part) for part in error.get("loc", ())) or "config"
    message = str(error.get("msg", "invalid value")).removeprefix("Value error, ")
    return ConfigurationError(
        f"{field_name}: {message}",
        details={"field": field_name, "rule": error.get("type", "value_error")},
    )


def build_config(**values: Any) -> RunConfig:
    """RunConfig from keyword values, pydantic errors mapped to ConfigurationError."""
    try:
        return RunConfig(**values)
    except PydanticValidationError as exc:
        raise _first_error(exc) from exc


def load_config(path: Optional[Path]) -> RunConfig:
    """Read a flat ``key = value`` file; a missing path means all defaults."""
    if path is None:
        return build_config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(
            f"cannot read configuration file {path}", details={"path": str(path)}
        ) from exc
    config = build_config(**_parse_lines(text))
    logger.info("config_loaded", path=str(path))
    return config


@dataclass
class KernelStage:
    model: CraneModel
    K: KernelSet
    L: KernelSet
    L_crosscheck: KernelSet
    gains: GainProfile


@dataclass
class PipelineResult:
    """Artifacts written by one pipeline run."""

    output_dir: Path
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    simulation: Optional[SimulationResult] = None


def compute_kernels(config: RunConfig) -> KernelStage:
    """Direct kernels, both inverse kernel solutions and the gains."""
    model = CraneModel(config.crane_params())
    grid = TriangularGrid(config.kernel_n)
    coeffs = coefficient_functions(model.constants)

    with log_stage("kernels", n=grid.n) as extra:
        # the direct sweep and the inverse sweep are independent
        with ThreadPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
            direct = pool.submit(solve_direct_kernels, grid, coeffs)
            inverse = pool.submit(solve_inverse_kernels_goursat, grid, coeffs)
            K, L_goursat = direct.result(), inverse.result()
        L_volterra = invert_kernels_volterra(K, grid)
        if config.inverse_kernel_method == "volterra":
            L, other = L_volterra, L_goursat
        else:
            L, other = L_goursat, L_volterra
        gains = compute_gains(L, grid, model.constants)
        extra["mu"] = gains.mu
    return KernelStage(model=model, K=K, L=L, L_crosscheck=other, gains=gains)


def initial_data(config: RunConfig) -> InitialData:
    """Initial profiles from files, or a straight cable at the platform offset."""
    if config.y0_profile is None and config.y1_profile is None:
        rest = InitialData.at_rest(config.platform_offset)
        if config.platform_velocity == 0.0:
            return rest
        return InitialData(
            s=rest.s,
            y0=rest.y0,
            y1=np.full_like(rest.s, config.platform_velocity),
            Xp0=config.platform_offset,
            Xp1=config.platform_velocity,
        )
    s = np.linspace(0.0, 1.0, 201)
    if config.y0_profile is not None:
        s0, v0 = read_profile(config.y0_profile)
        y0 = np.interp(s, s0, v0)
    else:
        y0 = np.full_like(s, config.platform_offset)
    if config.y1_profile is not None:
        s1, v1 = read_profile(config.y1_profile)
        y1 = np.interp(s, s1, v1)
    else:
        y1 = np.full_like(s, config.platform_velocity)
    return InitialData(
        s=s,
        y0=y0,
        y1=y1,
        Xp0=config.platform_offset,
        Xp1=config.platform_velocity,
    )


def write_kernel_artifacts(stage: KernelStage, out: Path) -> List[Path]:
    g = stage.gains
    files = [
        write_csv(out / "kernels_K.csv", ["x", "xi", "value", "field"], stage.K.rows()),
        write_csv(out / "kernels_L.csv", ["x", "xi", "value", "field"], stage.L.rows()),
        write_csv(
            out / "gains.csv",
            ["x", "a", "b", "a0", "b0", "mu"],
            ((g.x[k], g.a[k], g.b[k], g.a0, g.b0, g.mu) for k in range(g.x.size)),
        ),
        write_csv(
            out / "kernels_L_crosscheck.csv",
            ["field", "max_abs_difference"],
            stage.L.max_abs_difference(stage.L_crosscheck).items(),
        ),
    ]
    return files


def write_simulation_artifacts(result: SimulationResult, out: Path) -> List[Path]:
    return [
        write_csv(out / "phi.csv", ["t", "phi", "phi_dot"], result.trajectory.rows()),
        write_csv(
            out / "fields.csv", ["t", "x", "alpha", "beta"], result.frames.rows()
        ),
        write_csv(out / "platform.csv", ["t", "Xp"], result.platform_rows()),
        write_csv(out / "cable.csv", ["t", "s", "y"], result.cable_rows()),
        write_csv(out / "control.csv", ["t", "U", "V"], result.control_rows()),
    ]


def run_pipeline(
    config: RunConfig, output_dir: Optional[Path] = None, simulate: bool = True
) -> PipelineResult:
    """Run kernels and gains, then optionally the closed loop, writing CSVs."""
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult(output_dir=out)

    stage = compute_kernels(config)
    result.files += write_kernel_artifacts(stage, out)
    summary: Dict[str, Any] = {
        "mu": stage.gains.mu,
        "a0": stage.gains.a0,
        "kernel_n": config.kernel_n,
    }

    if simulate:
        with log_stage("simulation", t_end=config.t_end, dt=config.dt):
            simulator = ClosedLoopSimulator(
                stage.model,
                stage.K,
                stage.L,
                stage.gains,
                n_x=config.n_x,
                dt=config.dt,
                settling_threshold=config.settling_threshold,
            )
            sim = simulator.run(initial_data(config), config.t_end)
        result.simulation = sim
        result.files += write_simulation_artifacts(sim, out)
        summary = {
            "T0_observed": sim.T0_observed,
            "T1_observed": sim.T1_observed,
            **summary,
            "cfl_ratio": simulator.cfl_ratio,
        }

    result.summary = summary
    result.files.append(
        write_csv(out / "summary.csv", ["quantity", "value"], summary.items())
    )
    metrics = write_metrics(out)
    if metrics is not None:
        result.files.append(metrics)
    logger.info("pipeline_completed", output_dir=str(out), files=len(result.files))
    return result
