"""Unit tests for the closed loop in target coordinates."""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from crane_ft.control.closed_loop import (
    CABLE_NODES,
    ClosedLoopSimulator,
    InitialData,
    LoopState,
    SimulationResult,
    cable_angle,
    control_signals,
    detect_settling,
    feedback_compatibility_residual,
    initialize,
    reconstruct_cable,
    reconstruct_platform,
    validate_initial_data,
)
from crane_ft.control.finite_time_ode import PhiState
from crane_ft.control.transport_sim import FieldFrame, FrameSeries
from crane_ft.core.exceptions import ShapeError, ValidationError

pytestmark = pytest.mark.unit


@pytest.fixture(scope="module")
def simulator(coarse_stage):
    """Simulator on the reference transport grid."""
    return ClosedLoopSimulator(
        coarse_stage.model,
        coarse_stage.K,
        coarse_stage.L,
        coarse_stage.gains,
        n_x=20,
        dt=0.01,
    )


class TestInitialData:
    """Test initial data and its validation."""

    def test_at_rest(self):
        """Test the straight cable below an offset platform."""
        init = InitialData.at_rest(0.5)
        assert init.s.shape == (CABLE_NODES,)
        np.testing.assert_array_equal(init.y0, 0.5)
        np.testing.assert_array_equal(init.slope(), 0.0)
        validate_initial_data(init)

    def test_cable_must_meet_platform(self):
        """Test y0(1) = Xp0 is enforced."""
        init = InitialData.at_rest(0.5)
        shifted = InitialData(s=init.s, y0=init.y0 + 0.1, y1=init.y1, Xp0=0.5)
        with pytest.raises(ValidationError) as exc_info:
            validate_initial_data(shifted)
        assert exc_info.value.details["identity"] == "y0(1) = Xp0"

    def test_cable_vertical_at_load(self):
        """Test y0_s(0) = 0 is enforced."""
        s = np.linspace(0.0, 1.0, 21)
        init = InitialData(s=s, y0=s - 0.5, y1=np.zeros(21), Xp0=0.5)
        with pytest.raises(ValidationError) as exc_info:
            validate_initial_data(init)
        assert exc_info.value.details["identity"] == "y0_s(0) = 0"

    def test_shape_mismatch(self):
        """Test profiles must share one grid."""
        with pytest.raises(ShapeError):
            InitialData(s=np.zeros(3), y0=np.zeros(4), y1=np.zeros(3), Xp0=0.0)


class TestInitialize:
    """Test the map to target coordinates."""

    def test_platform_offset_only(self, simulator):
        """Test Xp0 = 0.5 at rest gives zero fields and phi0 = 1/sqrt(lambda(1))."""
        phi, frame = initialize(
            InitialData.at_rest(0.5), simulator.gains, simulator.K, simulator.model
        )
        assert frame.max_abs() == 0.0
        lam1 = simulator.model.constants.lambda1
        assert phi.phi == pytest.approx(2 * 0.5 / np.sqrt(lam1))
        assert phi.phi == pytest.approx(0.5594, abs=1e-4)
        assert phi.phi_dot == 0.0

    def test_all_zero(self, simulator):
        """Test zero data maps to the zero state."""
        phi, frame = initialize(
            InitialData.at_rest(0.0), simulator.gains, simulator.K, simulator.model
        )
        assert phi.phi == 0.0 and phi.phi_dot == 0.0
        assert frame.max_abs() == 0.0

    def test_phi_dot_from_beta(self, simulator):
        """Test phi1 = mu beta0(1) for a moving cable."""
        s = np.linspace(0.0, 1.0, 21)
        init = InitialData(s=s, y0=np.zeros(21), y1=s**2, Xp0=0.0, Xp1=1.0)
        phi, frame = initialize(init, simulator.gains, simulator.K, simulator.model)
        assert frame.beta[-1] != 0.0
        assert phi.phi_dot == pytest.approx(simulator.gains.mu * frame.beta[-1])

    def test_compatibility_residual_on_zero_fields(self, simulator):
        """Test the residual is phi_dot minus 2 Xp1 / sqrt(lambda(1)) at rest."""
        frame = FieldFrame.zeros(20)
        implied = 2.0 * 0.3 / np.sqrt(simulator.model.constants.lambda1)
        consistent = PhiState(phi=0.0, phi_dot=implied)
        args = (frame, simulator.gains, 0.3, simulator.model)
        assert feedback_compatibility_residual(consistent, *args) == pytest.approx(
            0.0, abs=1e-12
        )
        assert feedback_compatibility_residual(PhiState(), *args) == pytest.approx(
            -implied
        )


class TestReconstruction:
    """Test platform and cable reconstruction."""

    def test_platform_from_phi(self, simulator):
        """Test phi0 with zero fields gives Xp = 0.5."""
        lam1 = simulator.model.constants.lambda1
        phi = PhiState(phi=1.0 / np.sqrt(lam1))
        Xp = reconstruct_platform(
            phi, FieldFrame.zeros(20), simulator.gains, simulator.model
        )
        assert Xp == pytest.approx(0.5)

    def test_platform_round_trip(self, simulator):
        """Test Xp -> phi -> Xp on random frames."""
        rng = np.random.default_rng(2)
        gains, model = simulator.gains, simulator.model
        x = simulator.x
        for _ in range(20):
            frame = FieldFrame(x=x, alpha=rng.normal(size=21), beta=rng.normal(size=21))
            Xp = rng.normal()
            phi = 2 * Xp / np.sqrt(model.constants.lambda1) + trapezoid(
                gains.a * frame.alpha + gains.b * frame.beta, x
            )
            back = reconstruct_platform(PhiState(phi=phi), frame, gains, model)
            assert back == pytest.approx(Xp, abs=1e-10)

    def test_platform_grid_mismatch(self, simulator):
        """Test gains must live on the frame grid."""
        with pytest.raises(ShapeError):
            reconstruct_platform(
                PhiState(), FieldFrame.zeros(10), simulator.gains, simulator.model
            )

    def test_rigid_cable(self, simulator):
        """Test zero fields give a straight cable at the platform position."""
        y = reconstruct_cable(FieldFrame.zeros(20), simulator.L, 0.5, simulator.model)
        assert y.shape == (CABLE_NODES,)
        np.testing.assert_allclose(y, 0.5)

    def test_cable_anchored_at_platform(self, simulator):
        """Test z(1) = Xp for nonzero fields."""
        x = simulator.x
        frame = FieldFrame(x=x, alpha=np.sin(np.pi * x), beta=np.cos(np.pi * x))
        y = reconstruct_cable(frame, simulator.L, -0.2, simulator.model)
        assert y[-1] == pytest.approx(-0.2)

    def test_cable_angle(self):
        """Test the one-sided slope at s = 1."""
        s = np.linspace(0.0, 1.0, 21)
        assert cable_angle(s, 3.0 * s) == pytest.approx(3.0)
        assert cable_angle(s, s**2) == pytest.approx(2.0)


class TestControlSignals:
    """Test the platform force and intermediate feedback."""

    def test_initial_force(self, simulator):
        """Test U(0) = -(sqrt(lambda(1))/2) phi0^nu1 with zero fields."""
        state = simulator.initial_state(InitialData.at_rest(0.5))
        s = np.linspace(0.0, 1.0, CABLE_NODES)
        signals = simulator.signals(state, np.full(CABLE_NODES, 0.5), s)
        p, c = simulator.model.params, simulator.model.constants
        expected = -np.sqrt(c.lambda1) / 2.0 * state.phi.phi ** p.nu1
        assert signals.U == pytest.approx(expected)
        assert signals.U < 0.0
        assert signals.theta == 0.0
        assert signals.V == pytest.approx(p.M * expected)

    def test_settled_state(self, simulator):
        """Test everything vanishes at rest at the origin."""
        state = LoopState(phi=PhiState(), frame=FieldFrame.zeros(20), Xp=0.0)
        signals = control_signals(
            state, simulator.gains, simulator.flux_gradients, simulator.model, 0.0
        )
        assert signals.U == 0.0 and signals.V == 0.0


class TestStepping:
    """Test single closed-loop steps."""

    def test_zero_state(self, simulator):
        """Test the zero state is preserved."""
        state = simulator.initial_state(InitialData.at_rest(0.0))
        nxt = simulator.step(state)
        assert nxt.phi.phi == 0.0 and nxt.phi.phi_dot == 0.0
        assert nxt.frame.max_abs() == 0.0
        assert nxt.Xp == 0.0

    def test_first_step(self, simulator):
        """Test one step from rest leaves every node zero except beta(1, dt).

        beta(1, dt) = phi_dot(dt) / mu is nonzero since phi has started to move.
        """
        state = simulator.initial_state(InitialData.at_rest(0.5))
        assert state.Xp == pytest.approx(0.5)
        nxt = simulator.step(state)
        assert nxt.phi.phi_dot < 0.0
        assert not np.any(nxt.frame.beta[:-1])
        assert not np.any(nxt.frame.alpha)
        assert nxt.frame.beta[-1] != 0.0
        assert nxt.frame.beta[-1] == pytest.approx(
            nxt.phi.phi_dot / simulator.gains.mu, rel=1e-12
        )
        assert nxt.frame.t == pytest.approx(0.01)

    def test_boundary_coupling_every_step(self, simulator):
        """Test alpha(0, t) = beta(0, t) after every step."""
        state = simulator.initial_state(InitialData.at_rest(0.5))
        for _ in range(30):
            state = simulator.step(state)
            assert state.frame.alpha[0] == state.frame.beta[0]

    def test_cfl_ratio(self, simulator):
        """Test the simulator records its Courant number."""
        assert simulator.cfl_ratio == pytest.approx(0.9038, abs=1e-4)


class TestSettling:
    """Test settling detection on a full run."""

    def test_zero_run(self, simulator):
        """Test a zero run settles at t = 0."""
        result = simulator.run(InitialData.at_rest(0.0), 0.2)
        assert result.T0_observed == 0.0
        assert result.T1_observed == 0.0
        assert detect_settling(result) == (0.0, 0.0)

    def test_series_share_time_grid(self, simulator):
        """Test every series is sampled on the same time grid."""
        result = simulator.run(InitialData.at_rest(0.5), 0.2)
        n = result.t.size
        assert n == 21
        assert result.phi.shape == result.Xp.shape == result.U.shape == (n,)
        assert result.frames.alpha.shape == (n, 21)
        assert result.y.shape == (n, CABLE_NODES)
        assert len(list(result.control_rows())) == n
        assert len(list(result.cable_rows())) == n * CABLE_NODES
        assert result.mu == simulator.gains.mu


class TestQuietTransport:
    """Test field extinction once phi sits at the origin."""

    @staticmethod
    def _loaded_state(simulator, quiet_since):
        x = simulator.x
        frame = FieldFrame(x=x, alpha=np.full_like(x, 0.1), beta=np.full_like(x, 0.1))
        return LoopState(phi=PhiState(), frame=frame, Xp=0.0, quiet_since=quiet_since)

    def test_initial_quiet_time(self, simulator):
        """Test zero data starts quiet and an offset platform does not."""
        assert simulator.initial_state(InitialData.at_rest(0.0)).quiet_since == 0.0
        assert simulator.initial_state(InitialData.at_rest(0.5)).quiet_since is None

    def test_quiet_time_recorded_on_arrival(self, simulator):
        """Test the first step with phi at the origin stamps the quiet time."""
        state = LoopState(phi=PhiState(t=0.2), frame=FieldFrame.zeros(20), Xp=0.0)
        nxt = simulator.step(state)
        assert nxt.quiet_since == pytest.approx(0.21)
        assert simulator.step(nxt).quiet_since == nxt.quiet_since

    def test_alpha_survives_first_crossing(self, simulator):
        """Test alpha(1) is still nonzero 0.1 s after the input stops."""
        state = self._loaded_state(simulator, 0.0)
        for _ in range(10):
            state = simulator.step(state)
        assert state.frame.beta[-1] == 0.0
        assert state.frame.alpha[-1] != 0.0

    def test_fields_vanish_after_extinction_delay(self, simulator):
        """Test both fields are exactly zero once 2 Lambda(1) has passed."""
        state = self._loaded_state(simulator, 0.0)
        steps = int(np.ceil(simulator.model.extinction_delay() / simulator.dt)) + 1
        for _ in range(steps):
            state = simulator.step(state)
        assert state.frame.max_abs() == 0.0
        assert state.Xp == 0.0


def _synthetic_result(phi, field_level):
    """Run with zero platform and cable, given phi and a uniform alpha level."""
    t = np.linspace(0.0, 1.0, 11)
    x = np.linspace(0.0, 1.0, 21)
    alpha = np.outer(field_level, np.ones_like(x))
    frames = FrameSeries(t=t, x=x, alpha=alpha, beta=np.zeros_like(alpha))
    zeros = np.zeros_like(t)
    return SimulationResult(
        t=t,
        phi=np.asarray(phi, dtype=float),
        phi_dot=zeros,
        frames=frames,
        Xp=zeros,
        s=np.linspace(0.0, 1.0, CABLE_NODES),
        y=np.zeros((t.size, CABLE_NODES)),
        U=zeros,
        V=zeros,
    )


class TestSettlingRule:
    """Test how T1 is derived from the recorded series."""

    PHI = [0.1] * 5 + [0.0] * 6

    def test_not_before_ode_settling(self):
        """Test T1 = T0 when the rest of the state was quiet all along."""
        result = _synthetic_result(self.PHI, np.zeros(11))
        T0, T1 = detect_settling(result)
        assert T0 == pytest.approx(0.5)
        assert T1 == pytest.approx(0.5)

    def test_small_fields_delay_settling(self):
        """Test fields between 1e-6 and the shape threshold still hold T1 back."""
        level = np.array([1e-4] * 8 + [0.0] * 3)
        T0, T1 = detect_settling(_synthetic_result(self.PHI, level))
        assert T0 == pytest.approx(0.5)
        assert T1 == pytest.approx(0.8)

    def test_fields_below_extinction_bound(self):
        """Test fields under 1e-6 do not delay T1."""
        _, T1 = detect_settling(_synthetic_result(self.PHI, np.full(11, 1e-7)))
        assert T1 == pytest.approx(0.5)

    def test_unsettled_fields(self):
        """Test T1 is None while the fields are still live at the end."""
        level = np.full(11, 1e-4)
        T0, T1 = detect_settling(_synthetic_result(self.PHI, level))
        assert T0 == pytest.approx(0.5)
        assert T1 is None
