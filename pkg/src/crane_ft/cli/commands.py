"""CLI commands."""

import sys
from pathlib import Path
from typing import Callable, Optional

import click

from crane_ft.cli.checks import FAIL, run_checks
from crane_ft.cli.pipeline import load_config, run_pipeline
from crane_ft.core.config import RunConfig
from crane_ft.core.exceptions import (
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    CraneError,
    NumericalError,
)
from crane_ft.core.logging import log_error, setup_logging
from crane_ft.core.monitoring import record_failure

config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Flat key = value configuration file.",
)
out_option = click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory for the CSV artifacts.",
)


def _guarded(action: Callable[[], int]) -> None:
    """Run action and exit with its status; errors map to their exit codes."""
    try:
        status = action()
    except CraneError as exc:
        if isinstance(exc, NumericalError):
            record_failure(exc.code)
        log_error(exc, exc.details)
        click.echo(f"error [{exc.code}]: {exc.message}", err=True)
        sys.exit(exc.exit_code)
    except Exception as exc:  # noqa: BLE001
        log_error(exc)
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL_FAILURE)
    sys.exit(status)


def _load(config_path: Optional[Path], out_dir: Optional[Path]) -> RunConfig:
    config = load_config(config_path)
    if out_dir is not None:
        config = config.model_copy(update={"output_dir": out_dir})
    return config


@click.group()
def cli() -> None:
    """Finite-time boundary control of an overhead crane."""
    setup_logging()


@cli.command()
@config_option
@out_option
def kernels(config_path: Optional[Path], out_dir: Optional[Path]) -> None:
    """Solve the kernels and write kernels and gains CSVs."""

    def action() -> int:
        config = _load(config_path, out_dir)
        result = run_pipeline(config, simulate=False)
        click.echo(f"mu = {result.summary['mu']!r}")
        click.echo(f"wrote {len(result.files)} files to {result.output_dir}")
        return EXIT_OK

    _guarded(action)


@cli.command()
@config_option
@out_option
def simulate(config_path: Optional[Path], out_dir: Optional[Path]) -> None:
    """Run kernels, gains and the closed-loop simulation."""

    def action() -> int:
        config = _load(config_path, out_dir)
        result = run_pipeline(config, simulate=True)
        for key, value in result.summary.items():
            click.echo(f"{key} = {value!r}")
        click.echo(f"wrote {len(result.files)} files to {result.output_dir}")
        return EXIT_OK

    _guarded(action)


@cli.command()
@config_option
@out_option
def check(config_path: Optional[Path], out_dir: Optional[Path]) -> None:
    """Run the property checks and print a PASS/FAIL table."""

    def action() -> int:
        config = _load(config_path, out_dir)
        outcomes = run_checks(config)
        width = max(len(o.name) for o in outcomes)
        for o in outcomes:
            click.echo(f"{o.status:4}  {o.name:<{width}}  {o.detail}")
        if any(o.status == FAIL for o in outcomes):
            return EXIT_NUMERICAL_FAILURE
        return EXIT_OK

    _guarded(action)


if __name__ == "__main__":
    cli()
