"""Integration tests for configuration loading and the artifact pipeline."""

import csv

import pytest

from crane_ft.cli.pipeline import (
    build_config,
    initial_data,
    load_config,
    run_pipeline,
)
from crane_ft.core.config import RunConfig
from crane_ft.core.exceptions import ConfigurationError

pytestmark = pytest.mark.integration

KERNEL_FILES = {
    "kernels_K.csv",
    "kernels_L.csv",
    "gains.csv",
    "kernels_L_crosscheck.csv",
}
SIMULATION_FILES = {
    "phi.csv",
    "fields.csv",
    "platform.csv",
    "cable.csv",
    "control.csv",
}


@pytest.fixture(scope="module")
def small_config():
    """Reference parameters, coarse kernels and a short horizon."""
    return build_config(kernel_n=40, t_end=1.0)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestLoadConfig:
    """Test the key = value configuration file."""

    def test_missing_path_gives_defaults(self):
        """Test no file means the reference defaults."""
        assert load_config(None) == RunConfig()

    def test_empty_file(self, config_file):
        """Test an empty file gives the defaults."""
        assert load_config(config_file("")) == RunConfig()

    def test_values_and_comments(self, config_file):
        """Test values, fractions and comments are parsed."""
        path = config_file(
            "# coarse run\nkernel_n = 40\nnu1 = 1/3  # homogeneous\nt_end = 2\n"
        )
        config = load_config(path)
        assert config.kernel_n == 40
        assert config.nu1 == pytest.approx(1.0 / 3.0)
        assert config.t_end == 2.0

    def test_out_of_range_exponent(self, config_file):
        """Test nu2 outside (0, 1) names the field and the rule."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_config(config_file("nu2 = 1.5\n"))
        assert exc_info.value.message == "nu2: nu2 must lie in (0,1)"
        assert exc_info.value.exit_code == 2

    def test_cfl_violation(self, config_file):
        """Test dt = 0.02 with n_x = 20 is rejected before any solve."""
        with pytest.raises(ConfigurationError, match="CFL"):
            load_config(config_file("dt = 0.02\n"))

    def test_malformed_line(self, config_file):
        """Test lines without '=' are reported with their number."""
        with pytest.raises(ConfigurationError, match="line 1"):
            load_config(config_file("kernel_n 40\n"))

    def test_duplicate_key(self, config_file):
        """Test repeated keys are rejected."""
        with pytest.raises(ConfigurationError, match="duplicate"):
            load_config(config_file("dt = 0.01\ndt = 0.005\n"))

    def test_unknown_key(self, config_file):
        """Test unknown keys are rejected."""
        with pytest.raises(ConfigurationError, match="colour"):
            load_config(config_file("colour = red\n"))

    def test_unreadable_path(self, tmp_path):
        """Test a missing file is a configuration error."""
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_config(tmp_path / "missing.cfg")


class TestInitialData:
    """Test initial data selection from the configuration."""

    def test_at_rest(self, small_config):
        """Test the default release from rest at the offset."""
        init = initial_data(small_config)
        assert init.Xp0 == 0.5 and init.Xp1 == 0.0
        assert init.y0[0] == 0.5

    def test_profiles_from_files(self, tmp_path):
        """Test profile files are interpolated onto the s-grid."""
        y0 = tmp_path / "y0.csv"
        y0.write_text("s,y\n0.0,0.25\n1.0,0.25\n")
        config = build_config(y0_profile=y0, platform_offset=0.25)
        init = initial_data(config)
        assert init.s.size == 201
        assert init.y0[100] == pytest.approx(0.25)
        assert not init.y1.any()


class TestRunPipeline:
    """Test the end-to-end artifact pipeline."""

    def test_kernels_only(self, small_config, tmp_path):
        """Test kernels mode writes kernels, gains and a summary."""
        result = run_pipeline(small_config, tmp_path, simulate=False)
        names = {p.name for p in result.files}
        assert KERNEL_FILES <= names
        assert "summary.csv" in names
        assert not SIMULATION_FILES & names
        assert result.simulation is None
        assert result.summary["mu"] >= 2.0
        assert result.summary["kernel_n"] == 40

    def test_simulation_artifacts(self, small_config, tmp_path):
        """Test a full run writes every artifact with its header."""
        result = run_pipeline(small_config, tmp_path)
        names = {p.name for p in result.files}
        assert KERNEL_FILES | SIMULATION_FILES | {"summary.csv"} <= names
        assert set(result.summary) == {
            "T0_observed",
            "T1_observed",
            "mu",
            "a0",
            "kernel_n",
            "cfl_ratio",
        }
        # a one-second horizon is too short to settle
        assert result.summary["T0_observed"] is None

        phi = read_rows(tmp_path / "phi.csv")
        assert phi[0] == ["t", "phi", "phi_dot"]
        assert len(phi) == 1 + 101
        platform = read_rows(tmp_path / "platform.csv")
        assert platform[0] == ["t", "Xp"]
        assert float(platform[1][1]) == pytest.approx(0.5)
        cable = read_rows(tmp_path / "cable.csv")
        assert cable[0] == ["t", "s", "y"]
        assert len(cable) == 1 + 101 * 21
        assert read_rows(tmp_path / "control.csv")[0] == ["t", "U", "V"]
        assert read_rows(tmp_path / "fields.csv")[0] == ["t", "x", "alpha", "beta"]

    def test_summary_csv(self, small_config, tmp_path):
        """Test unsettled times are written as empty cells."""
        run_pipeline(small_config, tmp_path)
        rows = dict(read_rows(tmp_path / "summary.csv")[1:])
        assert rows["T0_observed"] == ""
        assert float(rows["mu"]) >= 2.0

    def test_deterministic_output(self, small_config, tmp_path):
        """Test two runs with one configuration give byte-identical CSVs."""
        first = run_pipeline(small_config, tmp_path / "a")
        run_pipeline(small_config, tmp_path / "b")
        for path in first.files:
            if path.suffix != ".csv":
                continue
            twin = tmp_path / "b" / path.name
            assert path.read_bytes() == twin.read_bytes(), path.name

    def test_output_dir_created(self, small_config, tmp_path):
        """Test nested output directories are created."""
        out = tmp_path / "nested" / "run"
        result = run_pipeline(small_config, out, simulate=False)
        assert result.output_dir == out
        assert (out / "gains.csv").exists()
