"""Application configuration settings."""

from fractions import Fraction
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# |nu1 - nu2/(2 - nu2)| below this counts as the homogeneous case
HOMOGENEITY_TOLERANCE = 1e-12


class Settings(BaseSettings):
    """Process-wide settings."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)

    # Application
    APP_NAME: str = "crane-ft"
    DEBUG: bool = False
    TESTING: bool = False

    # Performance
    MAX_WORKERS: int = 2

    # Output
    OUTPUT_DIR: str = "results"

    # Monitoring
    PROMETHEUS_ENABLED: bool = True


settings = Settings()


def parse_number(value: Any) -> Any:
    """Accept decimal literals and simple fractions such as ``1/3``."""
    if isinstance(value, str) and "/" in value:
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse {value!r} as a fraction") from exc
    return value


def is_homogeneous(nu1: float, nu2: float) -> bool:
    """True when nu1 = nu2/(2 - nu2), the case the implicit integrator supports."""
    return abs(nu1 - nu2 / (2.0 - nu2)) <= HOMOGENEITY_TOLERANCE


class RunConfig(BaseSettings):
    """Configuration of one kernels -> gains -> simulation run.

    Defaults reproduce the reference simulation: m = rho = 2, g = 9.81,
    nu2 = 1/2, nu1 = 1/3, kernel step 0.005, transport step 0.05, dt = 0.01,
    platform released at rest from X_p = 0.5.
    """

    model_config = SettingsConfigDict(
        env_prefix="CRANE_",
        case_sensitive=True,
        extra="forbid",
        frozen=True,
    )

    # Physical parameters
    m: float = 2.0
    rho: float = 2.0
    g: float = 9.81
    M: float = 10.0

    # Control exponents
    nu1: float = 1.0 / 3.0
    nu2: float = 0.5

    # Discretization
    kernel_n: int = Field(default=200, ge=2)
    n_x: int = Field(default=20, ge=2)
    dt: float = 0.01
    t_end: float = 6.0
    inverse_kernel_method: Literal["volterra", "goursat"] = "volterra"

    # Initial data
    platform_offset: float = 0.5
    platform_velocity: float = 0.0
    y0_profile: Optional[Path] = None
    y1_profile: Optional[Path] = None

    # Output
    output_dir: Path = Path(settings.OUTPUT_DIR)
    settling_threshold: float = 1e-2

    @field_validator(
        "m",
        "rho",
        "g",
        "M",
        "nu1",
        "nu2",
        "dt",
        "t_end",
        "platform_offset",
        "platform_velocity",
        "settling_threshold",
        mode="before",
    )
    @classmethod
    def parse_fraction(cls, v: Any) -> Any:
        """Allow fractions in numeric fields."""
        return parse_number(v)

    @field_validator("m", "rho", "g", "M")
    @classmethod
    def check_positive_physical(cls, v: float) -> float:
        """Physical constants must be positive."""
        if v <= 0:
            raise ValueError("must be strictly positive")
        return v

    @field_validator("nu2")
    @classmethod
    def check_nu2(cls, v: float) -> float:
        """The velocity exponent lies in (0, 1)."""
        if not 0.0 < v < 1.0:
            raise ValueError("nu2 must lie in (0,1)")
        return v

    @field_validator("dt", "t_end", "settling_threshold")
    @classmethod
    def check_positive_numeric(cls, v: float) -> float:
        """Step sizes, horizons and thresholds are positive."""
        if v <= 0:
            raise ValueError("must be strictly positive")
        return v

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        """Exponent relation and CFL precheck."""
        from crane_ft.control.crane_model import CraneParams, DerivedConstants

        if self.nu1 < self.nu2 / (2.0 - self.nu2) - HOMOGENEITY_TOLERANCE:
            raise ValueError("nu1 must satisfy nu1 >= nu2/(2 - nu2)")

        params = CraneParams(
            m=self.m,
            rho=self.rho,
            g=self.g,
            M=self.M,
            nu1=self.nu1,
            nu2=self.nu2,
        )
        ratio = DerivedConstants.from_params(params).lambda0 * self.dt * self.n_x
        if ratio > 1.0:
            raise ValueError(
                f"CFL condition violated: max(lambda) dt/dx = {ratio:.4f} > 1"
            )
        return self

    def crane_params(self) -> Any:
        """Physical parameters as a CraneParams model."""
        from crane_ft.control.crane_model import CraneParams

        return CraneParams(
            m=self.m,
            rho=self.rho,
            g=self.g,
            M=self.M,
            nu1=self.nu1,
            nu2=self.nu2,
        )

    @property
    def homogeneous(self) -> bool:
        """Whether the implicit homogeneous integrator applies."""
        return is_homogeneous(self.nu1, self.nu2)
