"""End-to-end reproduction of the reference crane simulation.

These runs use the default resolution and take tens of seconds.
"""

import numpy as np
import pytest

from crane_ft.cli.checks import (
    FAIL,
    PASS,
    ROUND_TRIP_CONSTANT,
    check_round_trips,
    run_checks,
)
from crane_ft.cli.pipeline import build_config, run_pipeline
from crane_ft.control.closed_loop import ClosedLoopSimulator, InitialData
from crane_ft.control.finite_time_ode import (
    PhiState,
    integrate_phi,
    integrate_phi_explicit,
)

pytestmark = [pytest.mark.functional, pytest.mark.slow]

PHI0 = 0.559439


@pytest.fixture(scope="module")
def reference_run(reference_stage):
    """Closed loop released at rest from Xp = 0.5 for six seconds."""
    simulator = ClosedLoopSimulator(
        reference_stage.model,
        reference_stage.K,
        reference_stage.L,
        reference_stage.gains,
        n_x=20,
        dt=0.01,
    )
    return simulator.run(InitialData.at_rest(0.5), 6.0)


class TestKernelsAndGains:
    """Test kernel and gain values at n = 200."""

    def test_mu(self, reference_stage):
        """Test mu = 2.379."""
        assert reference_stage.gains.mu == pytest.approx(2.379, abs=0.02)

    def test_imposed_diagonal(self, reference_stage):
        """Test L_ab(1,1) = C2/4."""
        assert reference_stage.L["ab"][-1, -1] == pytest.approx(0.0866434, abs=1e-6)

    def test_interior_values(self, reference_stage):
        """Test L_aa(1,1) and L_aa(1,0)."""
        L = reference_stage.L
        assert L["aa"][-1, -1] == pytest.approx(0.1407, abs=3e-3)
        assert L["aa"][-1, 0] == pytest.approx(0.0787, abs=2e-3)

    def test_inverse_methods_agree(self, reference_stage):
        """Test Volterra and Goursat inverse kernels agree at n = 200."""
        diff = reference_stage.L.max_abs_difference(reference_stage.L_crosscheck)
        assert max(diff.values()) < 5e-3


class TestOdeSettling:
    """Test the finite-time ODE from the reference initial value."""

    def test_settling_time(self):
        """Test T0 = 4.23."""
        traj = integrate_phi(PhiState(phi=PHI0), 0.01, 6.0, 1.0 / 3.0, 0.5)
        assert traj.T0 == pytest.approx(4.23, abs=0.15)
        assert traj.phi[-1] == 0.0 and traj.phi_dot[-1] == 0.0

    def test_matches_explicit_reference(self):
        """Test the implicit scheme tracks RK4 at dt/100 to 5e-3 up to T0 - 0.1."""
        implicit = integrate_phi(PhiState(phi=PHI0), 0.01, 6.0, 1.0 / 3.0, 0.5)
        explicit = integrate_phi_explicit(
            PhiState(phi=PHI0), 0.01, 6.0, 1.0 / 3.0, 0.5, substeps=100
        )
        assert implicit.T0 is not None
        before = implicit.t <= implicit.T0 - 0.1
        deviation = np.max(np.abs(implicit.phi[before] - explicit.phi[before]))
        assert deviation < 5e-3


class TestClosedLoop:
    """Test the closed-loop run."""

    def test_settling_times(self, reference_run):
        """Test T1 = 4.76 and T1 - T0 near the extinction delay."""
        T0, T1 = reference_run.T0_observed, reference_run.T1_observed
        assert T0 is not None and T1 is not None
        assert T1 == pytest.approx(4.76, abs=0.2)
        assert T1 - T0 == pytest.approx(0.529, abs=0.1)

    def test_fields_extinct_after_delay(self, reference_run, reference_stage):
        """Test alpha, beta < 1e-6 from T0 + 2 Lambda(1) + 5 dt on."""
        T0 = reference_run.T0_observed
        assert T0 is not None
        delay = 2.0 * float(reference_stage.model.big_lambda(1.0))
        late = reference_run.frames.t >= T0 + delay + 5 * 0.01
        assert np.any(late)
        assert np.max(np.abs(reference_run.frames.alpha[late])) < 1e-6
        assert np.max(np.abs(reference_run.frames.beta[late])) < 1e-6

    def test_shape_settles_after_ode(self, reference_run):
        """Test T1 never precedes T0."""
        T0, T1 = reference_run.T0_observed, reference_run.T1_observed
        assert T0 is not None and T1 is not None
        assert T1 >= T0

    def test_extinct_after_five_seconds(self, reference_run):
        """Test platform and cable stay below 1e-2 from t = 5."""
        late = reference_run.t >= 5.0
        assert np.max(np.abs(reference_run.Xp[late])) < 1e-2
        assert np.max(np.abs(reference_run.y[late])) < 1e-2

    def test_force_opposes_offset(self, reference_run):
        """Test U(0) < 0 for a positive platform offset and U vanishes at the end."""
        assert reference_run.U[0] < 0.0
        assert abs(reference_run.U[-1]) < 1e-3

    def test_platform_starts_at_offset(self, reference_run):
        """Test Xp(0) = 0.5."""
        assert reference_run.Xp[0] == pytest.approx(0.5)


class TestReferencePipeline:
    """Test the default pipeline and property checks."""

    def test_summary(self, tmp_path):
        """Test the default run summary."""
        result = run_pipeline(build_config(), tmp_path)
        assert result.summary["mu"] == pytest.approx(2.379, abs=0.02)
        assert result.summary["T1_observed"] == pytest.approx(4.76, abs=0.2)

    def test_checks_pass(self, reference_stage):
        """Test no property check fails on the reference configuration."""
        outcomes = run_checks(build_config(), reference_stage)
        failed = [o for o in outcomes if o.status == FAIL]
        assert not failed, failed

    def test_backstepping_round_trip_within_dx_squared(self, reference_stage):
        """Test the round-trip check passes and reports a C dx**2 bound."""
        config = build_config()
        outcome = check_round_trips(reference_stage, config)
        assert outcome.status == PASS, outcome.detail
        bound = ROUND_TRIP_CONSTANT / config.n_x**2
        assert f"bound {bound:.1e}" in outcome.detail
