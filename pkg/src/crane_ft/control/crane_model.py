"""Crane model: parameters, coordinate maps and characteristic variables.

The cable hangs on s in [0, 1] (s = 0 at the load, s = 1 at the platform)
and carries the affine tension d(s) = g s + g m / rho. The change of variable
x(s) turns the cable equation into a wave equation with speed
lambda(x) = C1 exp(-C2 x) on the unit interval.
"""

import math
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from crane_ft.core.exceptions import DomainError, ShapeError

# Slack accepted on the endpoints of [0, 1]
DOMAIN_TOLERANCE = 1e-12

FloatArray = NDArray[np.float64]


class CraneParams(BaseModel):
    """Physical constants and control exponents."""

    model_config = ConfigDict(frozen=True)

    m: float = Field(2.0, gt=0, description="Load mass [kg]")
    rho: float = Field(2.0, gt=0, description="Cable linear density [kg/m]")
    g: float = Field(9.81, gt=0, description="Gravity [m/s^2]")
    M: float = Field(10.0, gt=0, description="Platform mass [kg]")
    nu1: float = Field(1.0 / 3.0, gt=0, description="Exponent on phi in the feedback")
    nu2: float = Field(0.5, description="Exponent on phi_dot in the feedback")

    @field_validator("nu2")
    @classmethod
    def validate_nu2(cls, v: float) -> float:
        """Velocity exponent lies strictly between 0 and 1."""
        if not 0.0 < v < 1.0:
            raise ValueError("nu2 must lie in (0,1)")
        return v

    @model_validator(mode="after")
    def validate_exponents(self) -> "CraneParams":
        """Position exponent is bounded below by nu2/(2 - nu2)."""
        if self.nu1 < self.nu2 / (2.0 - self.nu2) - 1e-12:
            raise ValueError("nu1 must satisfy nu1 >= nu2/(2 - nu2)")
        return self


class DerivedConstants(BaseModel):
    """Constants of the normalized wave equation."""

    model_config = ConfigDict(frozen=True)

    J: float = Field(..., gt=0)
    C1: float = Field(..., gt=0)
    C2: float = Field(..., ge=0)

    @classmethod
    def from_params(cls, p: CraneParams) -> "DerivedConstants":
        """J = ln(1 + rho/m)/g, C1 = 1/(J sqrt(g m/rho)), C2 = g J/2."""
        J = math.log1p(p.rho / p.m) / p.g
        C1 = 1.0 / (J * math.sqrt(p.g * p.m / p.rho))
        C2 = p.g * J / 2.0
        return cls(J=J, C1=C1, C2=C2)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lambda0(self) -> float:
        """Wave speed at the load end, the maximum of lambda."""
        return self.C1

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lambda1(self) -> float:
        """Wave speed at the platform end."""
        return self.C1 * math.exp(-self.C2)


def check_unit_interval(value: ArrayLike, name: str) -> FloatArray:
    """Return value as an array, raising DomainError outside [0, 1]."""
    arr = np.asarray(value, dtype=float)
    if arr.size and (
        np.any(~np.isfinite(arr))
        or arr.min() < -DOMAIN_TOLERANCE
        or arr.max() > 1.0 + DOMAIN_TOLERANCE
    ):
        raise DomainError(
            f"{name} must lie in [0, 1]",
            details={
                "argument": name,
                "min": float(arr.min()),
                "max": float(arr.max()),
            },
        )
    return np.clip(arr, 0.0, 1.0)


def _scalar_or_array(arr: FloatArray) -> FloatArray | float:
    return float(arr) if arr.ndim == 0 else arr


class CraneModel:
    """Coordinate maps and pointwise transforms for one parameter set."""

    def __init__(self, params: CraneParams | None = None) -> None:
        self.params = params or CraneParams()
        self.constants = DerivedConstants.from_params(self.params)

    @classmethod
    def from_constants(
        cls, constants: DerivedConstants, params: CraneParams | None = None
    ) -> "CraneModel":
        """Build a model around explicit constants (e.g. C2 = 0 test cases)."""
        model = cls(params)
        model.constants = constants
        return model

    # Tension and coordinates

    def tension(self, s: ArrayLike) -> FloatArray | float:
        """Affine tension d(s) = g s + g m / rho."""
        p = self.params
        s_arr = check_unit_interval(s, "s")
        return _scalar_or_array(p.g * s_arr + p.g * p.m / p.rho)

    def tilde_tension(self, x: ArrayLike) -> FloatArray | float:
        """Tension in normalized coordinates, (g m/rho) exp(g J x)."""
        p = self.params
        x_arr = check_unit_interval(x, "x")
        scale = p.g * p.m / p.rho
        return _scalar_or_array(scale * np.exp(p.g * self.constants.J * x_arr))

    def s_to_x(self, s: ArrayLike) -> FloatArray | float:
        """x(s) = ln(1 + rho s/m) / ln(1 + rho/m)."""
        ratio = self.params.rho / self.params.m
        s_arr = check_unit_interval(s, "s")
        return _scalar_or_array(np.log1p(ratio * s_arr) / math.log1p(ratio))

    def x_to_s(self, x: ArrayLike) -> FloatArray | float:
        """Inverse of s_to_x: s = (m/rho)((1 + rho/m)^x - 1)."""
        ratio = self.params.rho / self.params.m
        x_arr = check_unit_interval(x, "x")
        return _scalar_or_array(np.expm1(x_arr * math.log1p(ratio)) / ratio)

    # Wave speed

    def wave_speed(self, x: ArrayLike) -> FloatArray | float:
        """lambda(x) = C1 exp(-C2 x)."""
        c = self.constants
        x_arr = check_unit_interval(x, "x")
        return _scalar_or_array(c.C1 * np.exp(-c.C2 * x_arr))

    def wave_speed_derivative(self, x: ArrayLike) -> FloatArray | float:
        """lambda'(x) = -C2 lambda(x)."""
        return _scalar_or_array(-self.constants.C2 * np.asarray(self.wave_speed(x)))

    def big_lambda(self, x: ArrayLike) -> FloatArray | float:
        """Travel time Lambda(x) = int_0^x 1/lambda, in closed form."""
        c = self.constants
        x_arr = check_unit_interval(x, "x")
        if c.C2 == 0.0:
            return _scalar_or_array(x_arr / c.C1)
        return _scalar_or_array(np.expm1(c.C2 * x_arr) / (c.C1 * c.C2))

    def big_lambda_inverse(self, tau: ArrayLike) -> FloatArray | float:
        """Position reached from x = 0 after travel time tau."""
        c = self.constants
        tau_arr = np.asarray(tau, dtype=float)
        total = float(self.big_lambda(1.0))
        if tau_arr.size and (
            tau_arr.min() < -DOMAIN_TOLERANCE or tau_arr.max() > total + 1e-12
        ):
            raise DomainError(
                "travel time outside [0, Lambda(1)]",
                details={"argument": "tau", "upper": total},
            )
        tau_arr = np.clip(tau_arr, 0.0, total)
        if c.C2 == 0.0:
            out = c.C1 * tau_arr
        else:
            out = np.log1p(c.C1 * c.C2 * tau_arr) / c.C2
        return _scalar_or_array(np.clip(out, 0.0, 1.0))

    # Crossing times

    def crossing_time_to_zero(self, x: ArrayLike) -> FloatArray | float:
        """Time for a leftward characteristic to travel from x to 0."""
        return self.big_lambda(x)

    def crossing_time_from_one(self, x: ArrayLike) -> FloatArray | float:
        """Time for a leftward characteristic to travel from 1 to x."""
        return _scalar_or_array(
            float(self.big_lambda(1.0)) - np.asarray(self.big_lambda(x))
        )

    def extinction_delay(self) -> float:
        """Delay between ODE settling and full extinction, 2 Lambda(1)."""
        return 2.0 * float(self.big_lambda(1.0))

    # Characteristic variables

    def riemann_forward(
        self, z_t: ArrayLike, z_x: ArrayLike, x: ArrayLike
    ) -> Tuple[FloatArray, FloatArray]:
        """(z_t, z_x) -> (u, v).

        u = (z_t - lam z_x)/sqrt(lam), v = (z_t + lam z_x)/sqrt(lam).
        """
        zt, zx, lam = self._aligned(z_t, z_x, x)
        root = np.sqrt(lam)
        return (zt - lam * zx) / root, (zt + lam * zx) / root

    def riemann_inverse(
        self, u: ArrayLike, v: ArrayLike, x: ArrayLike
    ) -> Tuple[FloatArray, FloatArray]:
        """(u, v) -> (z_t, z_x)."""
        uu, vv, lam = self._aligned(u, v, x)
        root = np.sqrt(lam)
        return root * (uu + vv) / 2.0, (vv - uu) / (2.0 * root)

    def _aligned(
        self, a: ArrayLike, b: ArrayLike, x: ArrayLike
    ) -> Tuple[FloatArray, FloatArray, FloatArray]:
        a_arr = np.asarray(a, dtype=float)
        b_arr = np.asarray(b, dtype=float)
        x_arr = np.asarray(x, dtype=float)
        if not (a_arr.shape == b_arr.shape == x_arr.shape):
            raise ShapeError(
                details={
                    "shapes": [list(a_arr.shape), list(b_arr.shape), list(x_arr.shape)]
                }
            )
        return a_arr, b_arr, np.asarray(self.wave_speed(x_arr), dtype=float)
