"""
Tests for scenario configuration loading
"""

import pytest

from app.config import ScenarioConfig, load_config
from app.services.cost import flight_energy, flight_power
from app.errors import ConfigError
from app.models import Scheme


class TestLoadConfig:

    def test_defaults(self):
        """Built-in defaults match the reference setup."""
        config = load_config()
        assert config.locations == 30
        assert config.tasks_per_location == (100, 300)
        assert config.reserve == pytest.approx(80.0)
        assert config.link_rate_bps == pytest.approx(6e6)

    def test_env_file(self, tmp_path):
        """Values are read from a dotenv-style file with the SEAL_ prefix."""
        path = tmp_path / "scenario.env"
        path.write_text("SEAL_LOCATIONS=4\nSEAL_DENSITY_PER_KM=20\nSEAL_DEADLINE_S=[1.0, 2.0]\n")
        config = load_config(path)
        assert config.locations == 4
        assert config.density_per_km == 20.0
        assert config.deadline_s == (1.0, 2.0)

    def test_environment_overrides_defaults(self, monkeypatch):
        """SEAL_* variables override the defaults; explicit overrides win."""
        monkeypatch.setenv("SEAL_SEED", "5")
        assert load_config().seed == 5
        assert load_config(seed=3).seed == 3

    def test_none_overrides_are_ignored(self):
        """Unset CLI options do not clobber defaults."""
        assert load_config(locations=None).locations == 30

    def test_missing_file(self, tmp_path):
        """A missing config file is a config error."""
        with pytest.raises(ConfigError) as excinfo:
            load_config(tmp_path / "absent.env")
        assert excinfo.value.field_paths == ["--config"]

    def test_invalid_field_path(self):
        """Validation errors carry the offending field path."""
        with pytest.raises(ConfigError) as excinfo:
            load_config(locations=-1)
        assert "locations" in excinfo.value.field_paths

    def test_empty_range(self):
        """Inverted ranges are rejected."""
        with pytest.raises(ConfigError):
            load_config(deadline_s=(3.0, 1.0))

    def test_density_above_jam(self):
        """Density cannot exceed the jam density."""
        with pytest.raises(ConfigError):
            load_config(density_per_km=200.0)


class TestAccessors:

    def setup_method(self):
        """Default configuration."""
        self.config = load_config()

    def test_intensity_units(self):
        """Per-megabit intensity is converted to cycles per bit."""
        config = load_config(intensity=50e6, intensity_unit="cycles_per_mb")
        assert config.intensity_cycles_per_bit == pytest.approx(50.0)

    def test_reserve_override(self):
        """An explicit reserve replaces the cloud price."""
        assert load_config(reserve_price=12.5).reserve == 12.5

    def test_energy_optimal_speed_within_bounds(self):
        """Without a configured speed the energy-optimal one is used."""
        energy = self.config.energy_params()
        assert energy.v_min <= energy.fly_speed <= energy.v_max
        assert load_config(fly_speed_mps=7.0).energy_params().fly_speed == 7.0

    def test_default_flight_optimum_is_interior(self):
        """The default power curve puts the cheapest flight speed strictly between the bounds."""
        energy = self.config.energy_params()
        assert energy.v_min < energy.fly_speed < energy.v_max
        assert energy.fly_speed == pytest.approx(10.0)
        assert flight_power(energy) == pytest.approx(150.0)
        assert flight_energy(energy) < flight_energy(energy, energy.v_max)
        assert flight_energy(energy) < flight_energy(energy, energy.v_min)

    def test_constant_flight_power_flies_fastest(self):
        """Without the curve the constant power makes v_max the cheapest speed."""
        energy = ScenarioConfig(fly_power_curve=None).energy_params()
        assert energy.fly_power_curve is None
        assert energy.fly_speed == energy.v_max

    def test_protocol_settings(self):
        """Protocol windows come from the config."""
        settings = load_config(claim_window_s=9.0).protocol_settings()
        assert settings.claim_window == 9.0
        assert settings.consensus_delay == (0.3, 0.81)
        assert settings.effective_key_grace == pytest.approx(0.81)

    def test_baseline_config_units(self):
        """Server capacities are converted to cycles per second."""
        baseline = self.config.baseline_config(Scheme.FOG)
        assert baseline.fog_compute == pytest.approx(3e9)
        assert baseline.uav_compute == pytest.approx(1e9)
