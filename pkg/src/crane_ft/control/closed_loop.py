"""Closed-loop simulation in target coordinates.

The finite-time ODE drives beta(1, t) = phi_dot(t)/mu; the transport fields
alpha, beta and phi together determine the platform position, the cable
profile and the applied control at every step.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid

from crane_ft.control.crane_model import CraneModel
from crane_ft.control.finite_time_ode import (
    PhiState,
    PhiTrajectory,
    SETTLING_THRESHOLD,
    phi_step,
    rk4_step,
    settling_time,
)
from crane_ft.control.kernel_engine import (
    GainProfile,
    KernelSet,
    apply_direct_transform,
    apply_inverse_transform,
)
from crane_ft.control.transport_sim import (
    FieldFrame,
    FrameSeries,
    advance,
    cfl_check,
    extinguish,
)
from crane_ft.core.config import is_homogeneous
from crane_ft.core.exceptions import ShapeError, ValidationError
from crane_ft.core.logging import logger
from crane_ft.core.monitoring import record_settling, simulation_steps_total
from crane_ft.core.utils import signed_power

FloatArray = NDArray[np.float64]

# Output s-grid for cable profiles
CABLE_NODES = 21
COMPATIBILITY_WARN = 1e-6
# max-norm bound on alpha, beta for the state to count as extinct
FIELD_EXTINCTION = 1e-6


@dataclass(frozen=True)
class InitialData:
    """Cable displacement/velocity on an s-grid plus platform state."""

    s: FloatArray
    y0: FloatArray
    y1: FloatArray
    Xp0: float
    Xp1: float = 0.0

    def __post_init__(self) -> None:
        if not (self.s.shape == self.y0.shape == self.y1.shape) or self.s.ndim != 1:
            raise ShapeError(
                "Initial profiles must share one s-grid",
                details={"s": list(self.s.shape), "y0": list(self.y0.shape)},
            )

    @classmethod
    def at_rest(cls, Xp0: float, n_s: int = CABLE_NODES) -> "InitialData":
        """Straight cable hanging below a platform released at rest from Xp0."""
        s = np.linspace(0.0, 1.0, n_s)
        return cls(s=s, y0=np.full(n_s, Xp0), y1=np.zeros(n_s), Xp0=Xp0, Xp1=0.0)

    def slope(self) -> FloatArray:
        """y0_s on the s-grid."""
        edge = 2 if self.s.size > 2 else 1
        return np.gradient(self.y0, self.s, edge_order=edge)


@dataclass(frozen=True)
class LoopState:
    """Everything carried from one time step to the next."""

    phi: PhiState
    frame: FieldFrame
    Xp: float
    # time phi reached the origin; None while it is still moving
    quiet_since: Optional[float] = None


@dataclass(frozen=True)
class ControlSignals:
    U: float
    V: float
    theta: float


@dataclass
class SimulationResult:
    """Time series of one closed-loop run on a shared time grid."""

    t: FloatArray
    phi: FloatArray
    phi_dot: FloatArray
    frames: FrameSeries
    Xp: FloatArray
    s: FloatArray
    y: FloatArray
    U: FloatArray
    V: FloatArray
    T0_observed: Optional[float] = None
    T1_observed: Optional[float] = None
    mu: float = field(default=float("nan"))

    @property
    def trajectory(self) -> PhiTrajectory:
        return PhiTrajectory(
            t=self.t, phi=self.phi, phi_dot=self.phi_dot, T0=self.T0_observed
        )

    def platform_rows(self) -> Iterator[Tuple[float, float]]:
        for k, tk in enumerate(self.t):
            yield float(tk), float(self.Xp[k])

    def cable_rows(self) -> Iterator[Tuple[float, float, float]]:
        for k, tk in enumerate(self.t):
            for j, sj in enumerate(self.s):
                yield float(tk), float(sj), float(self.y[k, j])

    def control_rows(self) -> Iterator[Tuple[float, float, float]]:
        for k, tk in enumerate(self.t):
            yield float(tk), float(self.U[k]), float(self.V[k])


def _profile_on_x(
    model: CraneModel, s: FloatArray, values: FloatArray, x: FloatArray
) -> FloatArray:
    return np.interp(np.asarray(model.x_to_s(x)), s, values)


def _weighted_integral(gains: GainProfile, frame: FieldFrame) -> float:
    return float(trapezoid(gains.a * frame.alpha + gains.b * frame.beta, frame.x))


def _check_grid(gains: GainProfile, frame: FieldFrame) -> None:
    if gains.x.shape != frame.x.shape:
        raise ShapeError(
            "Gains are not sampled on the transport grid",
            details={"gains": list(gains.x.shape), "frame": list(frame.x.shape)},
        )


def validate_initial_data(init: InitialData, tol: float = 1e-9) -> None:
    """Raise ValidationError unless y0(1) = Xp0 and y0_s(0) = 0."""
    top = float(init.y0[-1])
    if abs(top - init.Xp0) > tol * max(1.0, abs(init.Xp0)):
        raise ValidationError(
            "Initial cable must meet the platform: y0(1) = Xp0",
            details={"identity": "y0(1) = Xp0", "y0(1)": top, "Xp0": init.Xp0},
        )
    slope = init.slope()
    ds = float(np.max(np.diff(init.s)))
    bound = ds * max(1.0, float(np.max(np.abs(slope))))
    if abs(float(slope[0])) > bound:
        raise ValidationError(
            "Initial cable must be vertical at the load: y0_s(0) = 0",
            details={
                "identity": "y0_s(0) = 0",
                "y0_s(0)": float(slope[0]),
                "tolerance": bound,
            },
        )


def feedback_compatibility_residual(
    phi: PhiState, frame: FieldFrame, gains: GainProfile, Xp1: float, model: CraneModel
) -> float:
    """phi_dot(0) minus its value implied by Xp1 and the initial fields."""
    lam = np.asarray(model.wave_speed(frame.x))
    alpha_t = -lam * np.gradient(frame.alpha, frame.x)
    beta_t = lam * np.gradient(frame.beta, frame.x)
    implied = 2.0 * Xp1 / np.sqrt(model.constants.lambda1) + float(
        trapezoid(gains.a * alpha_t + gains.b * beta_t, frame.x)
    )
    return phi.phi_dot - implied


def initialize(
    init: InitialData, gains: GainProfile, K: KernelSet, model: CraneModel
) -> Tuple[PhiState, FieldFrame]:
    """Map physical initial data to (phi, phi_dot) and target fields."""
    validate_initial_data(init)
    x = gains.x
    c = model.constants
    s_of_x = np.asarray(model.x_to_s(x))
    # dz/dx = y_s ds/dx with ds/dx = J d(s)
    ds_dx = c.J * np.asarray(model.tension(s_of_x))
    z_x = _profile_on_x(model, init.s, init.slope(), x) * ds_dx
    z_t = _profile_on_x(model, init.s, init.y1, x)
    u, v = model.riemann_forward(z_t, z_x, x)
    alpha, beta = apply_direct_transform(K, u, v)
    frame = FieldFrame(x=x, alpha=alpha, beta=beta, t=0.0)

    phi0 = 2.0 * init.Xp0 / np.sqrt(c.lambda1) + _weighted_integral(gains, frame)
    phi1 = gains.mu * float(beta[-1])
    state = PhiState(phi=float(phi0), phi_dot=phi1, t=0.0)

    residual = feedback_compatibility_residual(state, frame, gains, init.Xp1, model)
    if abs(residual) > COMPATIBILITY_WARN:
        logger.warning("initial_data_incompatible", residual=residual)
    logger.info("loop_initialized", phi=state.phi, phi_dot=state.phi_dot)
    return state, frame


def reconstruct_platform(
    phi: PhiState, frame: FieldFrame, gains: GainProfile, model: CraneModel
) -> float:
    """Xp = (sqrt(lambda(1))/2)(phi - int(a alpha + b beta))."""
    _check_grid(gains, frame)
    half_root = np.sqrt(model.constants.lambda1) / 2.0
    return float(half_root * (phi.phi - _weighted_integral(gains, frame)))


def reconstruct_cable(
    frame: FieldFrame,
    L: KernelSet,
    Xp: float,
    model: CraneModel,
    s: Optional[ArrayLike] = None,
) -> FloatArray:
    """Cable displacement y on the s-grid, anchored at z(1) = Xp."""
    if s is None:
        s_nodes = np.linspace(0.0, 1.0, CABLE_NODES)
    else:
        s_nodes = np.asarray(s, dtype=float)
    u, v = apply_inverse_transform(L, frame.alpha, frame.beta)
    _, z_x = model.riemann_inverse(u, v, frame.x)
    running = cumulative_trapezoid(z_x, frame.x, initial=0.0)
    z = Xp - (running[-1] - running)
    return np.interp(np.asarray(model.s_to_x(s_nodes)), frame.x, z)


def cable_angle(s: FloatArray, y: FloatArray) -> float:
    """theta = y_s(1) by a second-order one-sided difference."""
    ds = float(s[-1] - s[-2])
    return float((3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * ds))


def control_signals(
    state: LoopState,
    gains: GainProfile,
    flux_gradients: Tuple[FloatArray, FloatArray],
    model: CraneModel,
    theta: float,
) -> ControlSignals:
    """Platform force U and intermediate feedback V = M U - (m + rho) g theta.

    flux_gradients holds ((a lambda)_x lambda)_x and ((b lambda)_x lambda)_x
    on the frame grid.
    """
    p, c = model.params, model.constants
    frame = state.frame
    x = frame.x
    lam = np.asarray(model.wave_speed(x))
    alpha_x = np.gradient(frame.alpha, x)
    beta_x = np.gradient(frame.beta, x)
    # one-sided differences at both ends
    dx = frame.dx
    alpha_x[0] = (frame.alpha[1] - frame.alpha[0]) / dx
    alpha_x[-1] = (frame.alpha[-1] - frame.alpha[-2]) / dx
    beta_x[0] = (frame.beta[1] - frame.beta[0]) / dx
    beta_x[-1] = (frame.beta[-1] - frame.beta[-2]) / dx
    alpha_t = -lam * alpha_x
    beta_t = lam * beta_x

    a_flux, b_flux = gains.a_lambda_x * lam, gains.b_lambda_x * lam
    d_a_flux, d_b_flux = flux_gradients
    interior = float(trapezoid(d_a_flux * frame.alpha + d_b_flux * frame.beta, x))
    edge = a_flux * frame.alpha + b_flux * frame.beta
    transport = -gains.a * lam * alpha_t + gains.b * lam * beta_t
    second_moment = (
        interior
        - float(edge[-1] - edge[0])
        + float(transport[-1] - transport[0])
    )

    U = -np.sqrt(c.lambda1) / 2.0 * (
        second_moment
        + signed_power(state.phi.phi_dot, p.nu2)
        + signed_power(state.phi.phi, p.nu1)
    )
    V = p.M * U - (p.m + p.rho) * p.g * theta
    return ControlSignals(U=float(U), V=float(V), theta=theta)


def detect_settling(
    result: SimulationResult, threshold: float = 1e-2
) -> Tuple[Optional[float], Optional[float]]:
    """T0 of (phi, phi_dot) and T1 of the whole crane state.

    T1 is the first time, not before T0, after which alpha and beta stay
    below FIELD_EXTINCTION while Xp and the cable profile stay below threshold.
    """
    ode_magnitude = np.maximum(np.abs(result.phi), np.abs(result.phi_dot))
    T0 = settling_time(result.t, ode_magnitude, SETTLING_THRESHOLD)
    fields = np.maximum(
        np.max(np.abs(result.frames.alpha), axis=1),
        np.max(np.abs(result.frames.beta), axis=1),
    )
    shape = np.maximum(np.abs(result.Xp), np.max(np.abs(result.y), axis=1))
    T_fields = settling_time(result.t, fields, FIELD_EXTINCTION)
    T_shape = settling_time(result.t, shape, threshold)
    if T0 is None or T_fields is None or T_shape is None:
        return T0, None
    return T0, max(T0, T_fields, T_shape)


class ClosedLoopSimulator:
    """Runs the closed loop for one parameter set and one set of kernels."""

    def __init__(
        self,
        model: CraneModel,
        K: KernelSet,
        L: KernelSet,
        gains: GainProfile,
        n_x: int,
        dt: float,
        settling_threshold: float = 1e-2,
    ) -> None:
        self.model = model
        self.dt = dt
        self.settling_threshold = settling_threshold
        self.x = np.linspace(0.0, 1.0, n_x + 1)
        self.cfl_ratio = cfl_check(dt, 1.0 / n_x, model.constants)
        self.K = K.resample(n_x)
        self.L = L.resample(n_x)

        # flux derivatives on the finer kernel grid, then resampled
        lam_fine = np.asarray(model.wave_speed(gains.x))
        d_a = np.gradient(gains.a_lambda_x * lam_fine, gains.x, edge_order=2)
        d_b = np.gradient(gains.b_lambda_x * lam_fine, gains.x, edge_order=2)
        self.gains = gains.resample(self.x)
        self.flux_gradients = (
            np.interp(self.x, gains.x, d_a),
            np.interp(self.x, gains.x, d_b),
        )

        p = model.params
        self.homogeneous = is_homogeneous(p.nu1, p.nu2)

    def initial_state(self, init: InitialData) -> LoopState:
        phi, frame = initialize(init, self.gains, self.K, self.model)
        Xp = reconstruct_platform(phi, frame, self.gains, self.model)
        quiet_since = phi.t if not np.any(phi.as_array()) else None
        return LoopState(phi=phi, frame=frame, Xp=Xp, quiet_since=quiet_since)

    def step(self, state: LoopState, t_next: Optional[float] = None) -> LoopState:
        """ODE to t, beta(1, t) = phi_dot/mu, beta sweep, alpha sweep, Xp.

        Once phi sits at the origin, nodes past their characteristic
        extinction time are cleared.
        """
        p = self.model.params
        t = state.phi.t + self.dt if t_next is None else t_next
        x_prev = state.phi.as_array()
        if not np.any(x_prev):
            x_next = x_prev
        elif self.homogeneous:
            x_next = phi_step(x_prev, self.dt, p.nu1, p.nu2)
        else:
            x_next = rk4_step(x_prev, self.dt, p.nu1, p.nu2)
        phi = PhiState(phi=float(x_next[0]), phi_dot=float(x_next[1]), t=t)
        frame = advance(
            state.frame,
            phi.phi_dot / self.gains.mu,
            self.dt,
            self.model.constants,
            t_next=t,
        )
        quiet_since = state.quiet_since
        if quiet_since is None and not np.any(x_next):
            quiet_since = t
        if quiet_since is not None:
            frame = extinguish(frame, t - quiet_since, self.model)
        Xp = reconstruct_platform(phi, frame, self.gains, self.model)
        simulation_steps_total.inc()
        return LoopState(phi=phi, frame=frame, Xp=Xp, quiet_since=quiet_since)

    def signals(self, state: LoopState, y: FloatArray, s: FloatArray) -> ControlSignals:
        theta = cable_angle(s, y)
        return control_signals(
            state, self.gains, self.flux_gradients, self.model, theta
        )

    def run(self, init: InitialData, t_end: float) -> SimulationResult:
        s = np.linspace(0.0, 1.0, CABLE_NODES)
        steps = int(round(t_end / self.dt))
        t = self.dt * np.arange(steps + 1)
        state = self.initial_state(init)

        frames: List[FieldFrame] = []
        phi = np.zeros(steps + 1)
        phi_dot = np.zeros(steps + 1)
        Xp = np.zeros(steps + 1)
        y = np.zeros((steps + 1, s.size))
        U = np.zeros(steps + 1)
        V = np.zeros(steps + 1)

        for k in range(steps + 1):
            if k > 0:
                state = self.step(state, t_next=float(t[k]))
            frames.append(state.frame)
            phi[k], phi_dot[k], Xp[k] = state.phi.phi, state.phi.phi_dot, state.Xp
            y[k] = reconstruct_cable(state.frame, self.L, state.Xp, self.model, s)
            sig = self.signals(state, y[k], s)
            U[k], V[k] = sig.U, sig.V

        result = SimulationResult(
            t=t,
            phi=phi,
            phi_dot=phi_dot,
            frames=FrameSeries.from_frames(frames),
            Xp=Xp,
            s=s,
            y=y,
            U=U,
            V=V,
            mu=self.gains.mu,
        )
        T0, T1 = detect_settling(result, self.settling_threshold)
        result.T0_observed, result.T1_observed = T0, T1
        record_settling("phi", result.T0_observed)
        record_settling("platform", result.T1_observed)
        logger.info(
            "simulation_completed",
            steps=steps,
            T0=result.T0_observed,
            T1=result.T1_observed,
            cfl=self.cfl_ratio,
        )
        return result
