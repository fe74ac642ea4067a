"""Target-system transport: beta moves toward x = 0, alpha toward x = 1.

    alpha_t = -lambda(x) alpha_x,   beta_t = lambda(x) beta_x,
    alpha(0, t) = beta(0, t),       beta(1, t) = phi_dot(t) / mu.
"""

from dataclasses import dataclass
from typing import Callable, Iterator, List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from crane_ft.control.crane_model import CraneModel, DerivedConstants
from crane_ft.core.exceptions import ConfigurationError, ShapeError

FloatArray = NDArray[np.float64]
Profile = Callable[[FloatArray], FloatArray]
History = Callable[[FloatArray], FloatArray | float]


@dataclass(frozen=True)
class FieldFrame:
    """alpha and beta on the uniform transport grid at time t."""

    x: FloatArray
    alpha: FloatArray
    beta: FloatArray
    t: float = 0.0

    def __post_init__(self) -> None:
        if not (self.x.shape == self.alpha.shape == self.beta.shape):
            raise ShapeError(
                details={
                    "x": list(self.x.shape),
                    "alpha": list(self.alpha.shape),
                    "beta": list(self.beta.shape),
                }
            )

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @classmethod
    def zeros(cls, n_x: int, t: float = 0.0) -> "FieldFrame":
        x = np.linspace(0.0, 1.0, n_x + 1)
        return cls(x=x, alpha=np.zeros_like(x), beta=np.zeros_like(x), t=t)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.alpha)), np.max(np.abs(self.beta))))


def cfl_check(dt: float, dx: float, dc: DerivedConstants) -> float:
    """Courant number max(lambda) dt/dx = lambda(0) dt/dx; rejected above 1."""
    if dt <= 0 or dx <= 0:
        raise ConfigurationError(
            "dt and dx must be positive", details={"dt": dt, "dx": dx}
        )
    ratio = dc.lambda0 * dt / dx
    if ratio > 1.0:
        raise ConfigurationError(
            f"CFL condition violated: max(lambda) dt/dx = {ratio:.4f} > 1",
            details={"field": "dt", "rule": "cfl", "ratio": ratio},
        )
    return ratio


def _speeds(x: FloatArray, dc: DerivedConstants) -> FloatArray:
    return dc.C1 * np.exp(-dc.C2 * x)


def beta_downwind_step(
    frame: FieldFrame,
    beta_boundary_1: float,
    dt: float,
    dx: float,
    dc: DerivedConstants,
) -> FloatArray:
    """beta_j += lambda_j dt/dx (beta_{j+1} - beta_j); beta_n = boundary value."""
    lam = _speeds(frame.x, dc)
    beta = frame.beta
    new = np.empty_like(beta)
    new[:-1] = beta[:-1] + lam[:-1] * (dt / dx) * (beta[1:] - beta[:-1])
    new[-1] = beta_boundary_1
    return new


def alpha_upwind_step(
    frame: FieldFrame,
    beta_at_zero: float,
    dt: float,
    dx: float,
    dc: DerivedConstants,
) -> FloatArray:
    """alpha_0 = beta(0, t); alpha_j -= lambda_j dt/dx (alpha_j - alpha_{j-1})."""
    lam = _speeds(frame.x, dc)
    alpha = frame.alpha
    new = np.empty_like(alpha)
    new[0] = beta_at_zero
    new[1:] = alpha[1:] - lam[1:] * (dt / dx) * (alpha[1:] - alpha[:-1])
    return new


def advance(
    frame: FieldFrame,
    beta_boundary_1: float,
    dt: float,
    dc: DerivedConstants,
    t_next: float | None = None,
) -> FieldFrame:
    """Beta sweep, boundary handoff alpha(0) = beta(0), alpha sweep."""
    dx = frame.dx
    beta = beta_downwind_step(frame, beta_boundary_1, dt, dx, dc)
    alpha = alpha_upwind_step(frame, float(beta[0]), dt, dx, dc)
    t = frame.t + dt if t_next is None else t_next
    return FieldFrame(x=frame.x, alpha=alpha, beta=beta, t=t)


def extinguish(frame: FieldFrame, quiet_for: float, model: CraneModel) -> FieldFrame:
    """Zero the nodes whose exact solution has already vanished.

    quiet_for is how long beta(1, .) has been identically zero. The exact
    beta(x, t) is then zero once quiet_for >= Lambda(1) - Lambda(x), and the
    exact alpha(x, t) once quiet_for >= Lambda(1) + Lambda(x), whatever the
    initial data. The sweeps alone leave a geometrically decaying residue there.
    """
    if quiet_for < 0:
        raise ConfigurationError(
            "quiet_for must be nonnegative", details={"quiet_for": quiet_for}
        )
    lam_x = np.asarray(model.big_lambda(frame.x))
    lam_1 = float(model.big_lambda(1.0))
    slack = 1e-9
    beta_done = quiet_for >= lam_1 - lam_x - slack
    alpha_done = quiet_for >= lam_1 + lam_x - slack
    if not (beta_done.any() or alpha_done.any()):
        return frame
    return FieldFrame(
        x=frame.x,
        alpha=np.where(alpha_done, 0.0, frame.alpha),
        beta=np.where(beta_done, 0.0, frame.beta),
        t=frame.t,
    )


def profile(x: ArrayLike, values: ArrayLike) -> Profile:
    """Piecewise-linear profile through sampled values."""
    x_arr = np.asarray(x, dtype=float)
    v_arr = np.asarray(values, dtype=float)

    def evaluate(points: FloatArray) -> FloatArray:
        return np.interp(points, x_arr, v_arr)

    return evaluate


def characteristic_beta(
    x: ArrayLike,
    t: float,
    beta0: Profile,
    phi_dot_history: History,
    mu: float,
    model: CraneModel,
) -> FloatArray | float:
    """Exact beta: initial data until the characteristic from x = 1 arrives."""
    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lam_x = np.atleast_1d(model.big_lambda(x_arr))
    # time for data entering at x = 1 to reach x
    delay = float(model.big_lambda(1.0)) - lam_x
    early = t < delay
    out = np.empty_like(lam_x, dtype=float)
    if np.any(early):
        origin = np.asarray(model.big_lambda_inverse(lam_x[early] + t))
        out[early] = beta0(origin)
    if np.any(~early):
        out[~early] = np.asarray(phi_dot_history(t - delay[~early])) / mu
    return float(out[0]) if scalar else out


def characteristic_alpha(
    x: ArrayLike,
    t: float,
    alpha0: Profile,
    beta_trace_at_0: History,
    model: CraneModel,
) -> FloatArray | float:
    """Exact alpha: initial data until the characteristic from x = 0 arrives."""
    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lam_x = np.atleast_1d(model.big_lambda(x_arr))
    early = t < lam_x
    out = np.empty_like(lam_x, dtype=float)
    if np.any(early):
        origin = np.asarray(model.big_lambda_inverse(lam_x[early] - t))
        out[early] = alpha0(origin)
    if np.any(~early):
        out[~early] = np.asarray(beta_trace_at_0(t - lam_x[~early]))
    return float(out[0]) if scalar else out


def beta_trace_at_zero(
    beta0: Profile, phi_dot_history: History, mu: float, model: CraneModel
) -> History:
    """t -> beta(0, t) from the exact beta solution."""

    def trace(t: ArrayLike) -> FloatArray | float:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        values = np.array(
            [
                characteristic_beta(0.0, float(tk), beta0, phi_dot_history, mu, model)
                for tk in t_arr
            ]
        )
        return float(values[0]) if np.ndim(t) == 0 else values

    return trace


@dataclass(frozen=True)
class FrameSeries:
    """Frames on a shared grid, stacked in time."""

    t: FloatArray
    x: FloatArray
    alpha: FloatArray
    beta: FloatArray

    @classmethod
    def from_frames(cls, frames: List[FieldFrame]) -> "FrameSeries":
        return cls(
            t=np.array([f.t for f in frames]),
            x=frames[0].x,
            alpha=np.stack([f.alpha for f in frames]),
            beta=np.stack([f.beta for f in frames]),
        )

    def frame(self, k: int) -> FieldFrame:
        return FieldFrame(
            x=self.x, alpha=self.alpha[k], beta=self.beta[k], t=float(self.t[k])
        )

    def rows(self) -> Iterator[Tuple[float, float, float, float]]:
        for k, tk in enumerate(self.t):
            for j, xj in enumerate(self.x):
                alpha, beta = self.alpha[k, j], self.beta[k, j]
                yield float(tk), float(xj), float(alpha), float(beta)


def simulate_transport(
    initial: FieldFrame,
    beta_boundary: History,
    dt: float,
    t_end: float,
    dc: DerivedConstants,
) -> FrameSeries:
    """Open-loop transport driven by a prescribed beta(1, t)."""
    cfl_check(dt, initial.dx, dc)
    steps = int(round((t_end - initial.t) / dt))
    frames = [initial]
    for k in range(1, steps + 1):
        t = initial.t + k * dt
        frames.append(advance(frames[-1], float(beta_boundary(t)), dt, dc, t_next=t))
    return FrameSeries.from_frames(frames)
