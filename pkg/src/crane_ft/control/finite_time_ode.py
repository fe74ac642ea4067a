"""Finite-time stable planar ODE and its homogeneity-preserving integrator.

The state x = (phi, phi_dot) follows

    phi'' + |phi'|^nu2 sgn(phi') + |phi|^nu1 sgn(phi) = 0,

which is homogeneous of degree -1 for the dilation d(s) = diag(e^{r1 s}, e^{r2 s})
when nu1 = nu2/(2 - nu2). In the coordinates z = Phi(x) the implicit Euler
step keeps the Euclidean norm of z nonincreasing and reaches the origin in
finitely many steps.
"""

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, computed_field
from scipy.optimize import brentq

from crane_ft.core.config import is_homogeneous
from crane_ft.core.exceptions import (
    ConfigurationError,
    DegenerateCaseError,
    HistoryLookupError,
    NonConvergenceError,
    UndefinedNormError,
)
from crane_ft.core.logging import logger
from crane_ft.core.monitoring import record_implicit_step
from crane_ft.core.utils import signed_power

FloatArray = NDArray[np.float64]

SNAP_TO_ZERO = 1e-12
SETTLING_THRESHOLD = 1e-9
RESIDUAL_TOLERANCE = 1e-10
MAX_ITERATIONS = 200
POLAR_SCAN_POINTS = 720
# implicit Euler steps per output step
IMPLICIT_SUBSTEPS = 8


class PhiState(BaseModel):
    """(phi, phi_dot) at time t."""

    model_config = ConfigDict(frozen=True)

    phi: float = 0.0
    phi_dot: float = 0.0
    t: float = 0.0

    def as_array(self) -> FloatArray:
        return np.array([self.phi, self.phi_dot])


class DilationParams(BaseModel):
    """Weights of the dilation d(s) = diag(e^{r1 s}, e^{r2 s})."""

    model_config = ConfigDict(frozen=True)

    r1: float = Field(..., gt=0)
    r2: float = Field(..., gt=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def nu_d(self) -> float:
        """Homogeneity degree of the field."""
        return -1.0

    @classmethod
    def from_exponents(cls, nu2: float) -> "DilationParams":
        """r1 = (2 - nu2)/(1 - nu2), r2 = 1/(1 - nu2)."""
        return cls(r1=(2.0 - nu2) / (1.0 - nu2), r2=1.0 / (1.0 - nu2))

    @property
    def generator(self) -> FloatArray:
        return np.diag([self.r1, self.r2])

    def dilate(self, x: ArrayLike, s: float) -> FloatArray:
        x_arr = np.asarray(x, dtype=float)
        return np.array(
            [math.exp(self.r1 * s) * x_arr[0], math.exp(self.r2 * s) * x_arr[1]]
        )


def haimo_field(x: ArrayLike, nu1: float, nu2: float) -> FloatArray:
    """(x2, -|x1|^nu1 sgn x1 - |x2|^nu2 sgn x2), vectorized over the last axis."""
    x_arr = np.asarray(x, dtype=float)
    x1, x2 = x_arr[..., 0], x_arr[..., 1]
    return np.stack([x2, -signed_power(x1, nu1) - signed_power(x2, nu2)], axis=-1)


def homogeneous_norm(
    x: ArrayLike, dp: DilationParams, tol: float = 1e-14
) -> Tuple[float, float]:
    """Canonical homogeneous norm e^{s_x} and its exponent s_x.

    s_x solves e^{-2 r1 s} x1^2 + e^{-2 r2 s} x2^2 = 1, decreasing in s;
    the root is bracketed by doubling and refined with Brent's method.
    """
    x1, x2 = (float(v) for v in np.asarray(x, dtype=float))
    if x1 == 0.0 and x2 == 0.0:
        raise UndefinedNormError(details={"x": [x1, x2]})

    def log_sphere(s: float) -> float:
        # log of the squared Euclidean norm of d(-s) x
        terms = []
        if x1 != 0.0:
            terms.append(2.0 * math.log(abs(x1)) - 2.0 * dp.r1 * s)
        if x2 != 0.0:
            terms.append(2.0 * math.log(abs(x2)) - 2.0 * dp.r2 * s)
        return float(np.logaddexp.reduce(terms))

    value = log_sphere(0.0)
    if value == 0.0:
        return 1.0, 0.0
    step = 1.0 if value > 0 else -1.0
    lo, hi = 0.0, step
    while (log_sphere(hi) > 0) == (value > 0):
        lo, hi = hi, 2.0 * hi
    a, b = sorted((lo, hi))
    s_x = float(brentq(log_sphere, a, b, xtol=tol, rtol=4 * np.finfo(float).eps))
    return math.exp(s_x), s_x


def transform_forward(x: ArrayLike, dp: DilationParams) -> FloatArray:
    """z = ||x||_d d(-ln ||x||_d) x, with 0 mapped to 0."""
    x_arr = np.asarray(x, dtype=float)
    if not np.any(x_arr):
        return np.zeros(2)
    norm, s_x = homogeneous_norm(x_arr, dp)
    return norm * dp.dilate(x_arr, -s_x)


def transform_inverse(z: ArrayLike, dp: DilationParams) -> FloatArray:
    """x = d(ln ||z||) z / ||z||, with 0 mapped to 0."""
    z_arr = np.asarray(z, dtype=float)
    norm = float(np.linalg.norm(z_arr))
    if norm == 0.0:
        return np.zeros(2)
    return np.array(
        [norm**dp.r1 * z_arr[0] / norm, norm**dp.r2 * z_arr[1] / norm]
    )


def transformed_field(
    z: ArrayLike, nu1: float, nu2: float, dp: DilationParams
) -> FloatArray:
    """F~(z) = ((I - G) z z^T / (z^T G z) + I) F(z/||z||); depends on z/||z|| only."""
    z_arr = np.asarray(z, dtype=float)
    e = z_arr / np.linalg.norm(z_arr)
    G = dp.generator
    proj = np.outer(e, e) / float(e @ G @ e)
    return ((np.eye(2) - G) @ proj + np.eye(2)) @ haimo_field(e, nu1, nu2)


def _residual(
    w: FloatArray, z: FloatArray, dt: float, nu1: float, nu2: float, dp: DilationParams
) -> float:
    return float(np.linalg.norm(w - z - dt * transformed_field(w, nu1, nu2, dp)))


def _fixed_point(
    z: FloatArray, dt: float, nu1: float, nu2: float, dp: DilationParams
) -> Tuple[Optional[FloatArray], float]:
    w = z.copy()
    damping = 1.0
    residual = np.inf
    for _ in range(MAX_ITERATIONS):
        if np.linalg.norm(w) < SNAP_TO_ZERO:
            return None, residual
        target = z + dt * transformed_field(w, nu1, nu2, dp)
        new_residual = float(np.linalg.norm(target - w))
        if new_residual < RESIDUAL_TOLERANCE:
            return w, new_residual
        if new_residual > residual:
            damping *= 0.5
        residual = new_residual
        w = w + damping * (target - w)
    return None, residual


def _polar(
    z: FloatArray, dt: float, nu1: float, nu2: float, dp: DilationParams
) -> Tuple[FloatArray, float]:
    """Solve r e = z + dt F~(e) on the unit circle; origin when no r > 0."""

    def image(theta: float) -> FloatArray:
        e = np.array([math.cos(theta), math.sin(theta)])
        return z + dt * transformed_field(e, nu1, nu2, dp)

    def normal(theta: float) -> float:
        p = image(theta)
        return -math.sin(theta) * p[0] + math.cos(theta) * p[1]

    thetas = np.linspace(-math.pi, math.pi, POLAR_SCAN_POINTS + 1)
    values = np.array([normal(t) for t in thetas])
    direction = z / np.linalg.norm(z)
    best: Optional[FloatArray] = None
    best_alignment = -np.inf
    for k in range(POLAR_SCAN_POINTS):
        left, right = values[k], values[k + 1]
        if left == 0.0:
            theta = float(thetas[k])
        elif left * right < 0.0:
            theta = float(brentq(normal, thetas[k], thetas[k + 1], xtol=1e-15))
        else:
            continue
        e = np.array([math.cos(theta), math.sin(theta)])
        r = float(e @ image(theta))
        if r <= 0.0:
            continue
        alignment = float(e @ direction)
        if alignment > best_alignment:
            best, best_alignment = r * e, alignment

    if best is None:
        return np.zeros(2), 0.0
    return best, _residual(best, z, dt, nu1, nu2, dp)


def implicit_step(z: ArrayLike, dt: float, nu1: float, nu2: float) -> FloatArray:
    """Solve z_next = z + dt F~(z_next) for the transformed state."""
    z_arr = np.asarray(z, dtype=float)
    if dt <= 0:
        raise ConfigurationError("dt must be positive", details={"field": "dt"})
    if np.linalg.norm(z_arr) < SNAP_TO_ZERO:
        return np.zeros(2)
    dp = DilationParams.from_exponents(nu2)

    w, residual = _fixed_point(z_arr, dt, nu1, nu2, dp)
    if w is not None:
        record_implicit_step("fixed_point")
        return w if np.linalg.norm(w) >= SNAP_TO_ZERO else np.zeros(2)

    logger.debug("implicit_step_fallback", z=z_arr.tolist(), residual=residual)
    w, residual = _polar(z_arr, dt, nu1, nu2, dp)
    if residual > RESIDUAL_TOLERANCE:
        raise NonConvergenceError(
            last_residual=residual, details={"z": z_arr.tolist(), "dt": dt}
        )
    record_implicit_step("polar" if np.any(w) else "origin")
    return w if np.linalg.norm(w) >= SNAP_TO_ZERO else np.zeros(2)


def phi_step(
    x: ArrayLike,
    dt: float,
    nu1: float,
    nu2: float,
    substeps: int = IMPLICIT_SUBSTEPS,
) -> FloatArray:
    """Transform, substeps implicit steps of dt/substeps in z, transform back.

    Every substep keeps ||z|| nonincreasing, so the origin is still reached
    exactly; the substeps only shrink the first-order error.
    """
    if substeps < 1:
        raise ConfigurationError(
            "substeps must be at least 1", details={"field": "substeps"}
        )
    dp = DilationParams.from_exponents(nu2)
    z = transform_forward(x, dp)
    h = dt / substeps
    for _ in range(substeps):
        if not np.any(z):
            break
        z = implicit_step(z, h, nu1, nu2)
    return transform_inverse(z, dp)


@dataclass(frozen=True)
class PhiTrajectory:
    """Sampled (phi, phi_dot) history on a uniform time grid."""

    t: FloatArray
    phi: FloatArray
    phi_dot: FloatArray
    T0: Optional[float]

    def state(self, k: int) -> PhiState:
        return PhiState(
            phi=float(self.phi[k]), phi_dot=float(self.phi_dot[k]), t=float(self.t[k])
        )

    def phi_dot_at(self, t: ArrayLike) -> FloatArray | float:
        """phi_dot by linear interpolation between recorded steps."""
        t_arr = np.asarray(t, dtype=float)
        slack = 1e-9 * max(1.0, float(self.t[-1]))
        outside = t_arr.size and (
            t_arr.min() < self.t[0] - slack or t_arr.max() > self.t[-1] + slack
        )
        if outside:
            raise HistoryLookupError(
                details={
                    "requested": [float(t_arr.min()), float(t_arr.max())],
                    "recorded": [float(self.t[0]), float(self.t[-1])],
                }
            )
        out = np.interp(t_arr, self.t, self.phi_dot)
        return float(out) if out.ndim == 0 else out

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        for k in range(self.t.size):
            yield float(self.t[k]), float(self.phi[k]), float(self.phi_dot[k])


def settling_time(
    t: FloatArray, magnitude: FloatArray, threshold: float
) -> Optional[float]:
    """First time after which magnitude stays below threshold; None if never."""
    above = np.flatnonzero(magnitude >= threshold)
    if above.size == 0:
        return float(t[0])
    last = int(above[-1])
    if last + 1 >= t.size:
        return None
    return float(t[last + 1])


def _time_grid(t0: float, dt: float, t_end: float) -> FloatArray:
    if dt <= 0:
        raise ConfigurationError("dt must be positive", details={"field": "dt"})
    steps = int(round((t_end - t0) / dt))
    return t0 + dt * np.arange(steps + 1)


def integrate_phi(
    initial: PhiState,
    dt: float,
    t_end: float,
    nu1: float,
    nu2: float,
    substeps: int = IMPLICIT_SUBSTEPS,
) -> PhiTrajectory:
    """Implicit homogeneous integration; requires nu1 = nu2/(2 - nu2)."""
    if not is_homogeneous(nu1, nu2):
        raise ConfigurationError(
            "Implicit integrator requires nu1 = nu2/(2 - nu2)",
            details={"field": "nu1", "rule": "homogeneity"},
        )
    t = _time_grid(initial.t, dt, t_end)
    states = np.zeros((t.size, 2))
    states[0] = initial.as_array()
    for k in range(1, t.size):
        if not np.any(states[k - 1]):
            # the origin is absorbing
            break
        states[k] = phi_step(states[k - 1], dt, nu1, nu2, substeps)

    T0 = settling_time(t, np.max(np.abs(states), axis=1), SETTLING_THRESHOLD)
    logger.info(
        "phi_integrated",
        method="implicit",
        steps=t.size - 1,
        substeps=substeps,
        T0=T0,
    )
    return PhiTrajectory(t=t, phi=states[:, 0], phi_dot=states[:, 1], T0=T0)


def rk4_step(
    x: ArrayLike, dt: float, nu1: float, nu2: float, substeps: int = 100
) -> FloatArray:
    """Advance the original ODE by dt with substeps classical RK4 steps."""
    h = dt / substeps
    state = np.asarray(x, dtype=float)
    for _ in range(substeps):
        k1 = haimo_field(state, nu1, nu2)
        k2 = haimo_field(state + 0.5 * h * k1, nu1, nu2)
        k3 = haimo_field(state + 0.5 * h * k2, nu1, nu2)
        k4 = haimo_field(state + h * k3, nu1, nu2)
        state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state


def integrate_phi_explicit(
    initial: PhiState,
    dt: float,
    t_end: float,
    nu1: float,
    nu2: float,
    substeps: int = 100,
) -> PhiTrajectory:
    """Classical fixed-step RK4 on the original ODE with step dt/substeps.

    Valid for any admissible exponents; samples are kept every dt.
    """
    t = _time_grid(initial.t, dt, t_end)
    states = np.zeros((t.size, 2))
    states[0] = initial.as_array()
    for k in range(1, t.size):
        states[k] = rk4_step(states[k - 1], dt, nu1, nu2, substeps)

    T0 = settling_time(t, np.max(np.abs(states), axis=1), SETTLING_THRESHOLD)
    logger.info("phi_integrated", method="explicit", steps=t.size - 1, T0=T0)
    return PhiTrajectory(t=t, phi=states[:, 0], phi_dot=states[:, 1], T0=T0)


def strict_negativity_check(z: ArrayLike, nu1: float, nu2: float) -> FloatArray | float:
    """e2 (e1 - |e1|^nu1 sgn e1 - |e2|^nu2 sgn e2) with e = z/||z||.

    Negative whenever z2 != 0; vectorized over the last axis.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr[..., 1] == 0.0):
        raise DegenerateCaseError(
            "Expression is not strictly negative on z2 = 0",
            details={"count": int(np.sum(z_arr[..., 1] == 0.0))},
        )
    e = z_arr / np.linalg.norm(z_arr, axis=-1, keepdims=True)
    e1, e2 = e[..., 0], e[..., 1]
    out = e2 * (e1 - signed_power(e1, nu1) - signed_power(e2, nu2))
    return float(out) if np.ndim(out) == 0 else out
