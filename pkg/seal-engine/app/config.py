"""
Scenario configuration.

Values come from (highest priority first) explicit keyword overrides, SEAL_*
environment variables, the dotenv-style config file, and the built-in defaults
of the reference simulation setup. Human units are converted to SI by the
accessor properties; services never read the raw unit fields.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict, SettingsError

from app.errors import ConfigError
from app.models import (
    BaselineConfig,
    CostWeights,
    EnergyParams,
    ProtocolSettings,
    Scheme,
    ServerProfile,
    TrafficParams,
    VehicleAttributeRanges,
)
from app.services.cost import cloud_price, energy_optimal_speed

logger = logging.getLogger(__name__)

GIGA = 1e9
MEGA = 1e6
KMH = 1000.0 / 3600.0

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_RANGE_FIELDS = (
    "tasks_per_location", "task_size_mb", "deadline_s", "idle_compute_gcps", "urgency",
    "vehicle_speed_kmh", "unit_cost_per_gcps", "consensus_delay_s",
)


class ScenarioConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SEAL_", extra="ignore", frozen=True)

    seed: int = Field(default=0, ge=0)
    locations: int = Field(default=30, ge=0, description="Sensing locations N")
    slot_count: int = Field(default=1000, ge=0, description="Slots K")
    slot_interval_s: float = Field(default=1.0, gt=0.0)
    tasks_per_location: Tuple[int, int] = (100, 300)
    task_count: Optional[int] = Field(default=None, ge=0, description="Fixes J_n instead of sampling it")
    altitude_m: float = Field(default=50.0, ge=0.0)
    task_size_mb: Tuple[float, float] = (3.0, 9.0)
    deadline_s: Tuple[float, float] = (1.0, 2.5)
    idle_compute_gcps: Tuple[float, float] = (0.5, 2.0)
    omega: float = Field(default=0.5, gt=0.0, lt=1.0)
    intensity: float = Field(default=50.0, gt=0.0)
    intensity_unit: Literal["cycles_per_bit", "cycles_per_mb"] = "cycles_per_bit"
    urgency: Tuple[float, float] = (0.1, 1.0)
    coverage_radius_m: float = Field(default=250.0, gt=0.0)
    segment_length_m: float = Field(default=500.0, ge=0.0)
    link_rate_mbps: float = Field(default=6.0, gt=0.0)
    fly_speed_min_mps: float = Field(default=2.0, gt=0.0)
    fly_speed_max_mps: float = Field(default=20.0, gt=0.0)
    fly_speed_mps: Optional[float] = Field(default=None, gt=0.0)
    lambda_p: float = Field(default=40.0, gt=0.0)
    vehicle_speed_kmh: Tuple[float, float] = (30.0, 80.0)
    unit_cost_per_gcps: Tuple[float, float] = (1.0, 9.0)
    fixed_cost: float = Field(default=0.0, ge=0.0)
    p_a2g_w: float = Field(default=0.2, gt=0.0)
    p_hover_w: float = Field(default=500.0, gt=0.0)
    # constant propulsion power, used only when fly_power_curve is None
    fly_power_w: float = Field(default=150.0, gt=0.0)
    # rotary-wing P(V) = c1*V^3 + c2/V: 150 W at its 10 m/s energy optimum
    fly_power_curve: Optional[Tuple[float, float]] = (0.075, 750.0)
    density_per_km: float = Field(default=50.0, ge=0.0)
    max_density_per_km: float = Field(default=150.0, gt=0.0)
    vehicle_count: Optional[int] = Field(default=None, ge=0, description="Fixes I instead of deriving it from density")
    supply_margin: float = Field(default=1.25, ge=1.0)
    reserve_price: Optional[float] = Field(default=None, ge=0.0)
    deposit_multiplier: float = Field(default=1.5, ge=1.0)
    slash_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    cloud_unit_cost: float = Field(default=8.0, gt=0.0)
    cloud_compute_gcps: float = Field(default=10.0, gt=0.0)
    fog_unit_cost: float = Field(default=9.0, gt=0.0)
    fog_compute_gcps: float = Field(default=3.0, gt=0.0)
    uav_compute_gcps: float = Field(default=1.0, gt=0.0)
    paa_speed_seed: int = Field(default=0, ge=0)
    consensus_delay_s: Tuple[float, float] = (0.3, 0.81)
    phase_window_s: float = Field(default=2.0, gt=0.0)
    claim_window_s: float = Field(default=5.0, gt=0.0)
    certificate_ttl_s: float = Field(default=3600.0, gt=0.0)
    key_grace_s: Optional[float] = Field(default=None, ge=0.0)
    run_protocol: bool = True
    adversary: str = "honest"
    trace_path: Optional[Path] = None
    log_level: str = "INFO"

    @model_validator(mode="after")
    def _check_ranges(self) -> "ScenarioConfig":
        for name in _RANGE_FIELDS:
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name}: range is empty ({low} > {high})")
            if low < 0:
                raise ValueError(f"{name}: range must be non-negative")
        if self.task_size_mb[0] <= 0 or self.deadline_s[0] <= 0 or self.urgency[0] <= 0:
            raise ValueError("task size, deadline and urgency ranges must be positive")
        if self.urgency[1] > 1.0:
            raise ValueError("urgency: range must lie within (0, 1]")
        if self.unit_cost_per_gcps[0] <= 0 or self.vehicle_speed_kmh[0] <= 0:
            raise ValueError("unit cost and vehicle speed ranges must be positive")
        if self.fly_speed_min_mps > self.fly_speed_max_mps:
            raise ValueError("fly_speed_min_mps must not exceed fly_speed_max_mps")
        if self.fly_speed_mps is not None and not (
            self.fly_speed_min_mps <= self.fly_speed_mps <= self.fly_speed_max_mps
        ):
            raise ValueError("fly_speed_mps must lie within the flight speed bounds")
        if self.density_per_km > self.max_density_per_km:
            raise ValueError("density_per_km must not exceed max_density_per_km")
        return self

    # SI accessors

    @property
    def intensity_cycles_per_bit(self) -> float:
        if self.intensity_unit == "cycles_per_mb":
            return self.intensity / MEGA
        return self.intensity

    @property
    def link_rate_bps(self) -> float:
        return self.link_rate_mbps * MEGA

    @property
    def task_size_bits(self) -> Tuple[float, float]:
        return (self.task_size_mb[0] * MEGA, self.task_size_mb[1] * MEGA)

    @property
    def reserve(self) -> float:
        """Price cap per task; defaults to what the cloud charges for it."""
        if self.reserve_price is not None:
            return self.reserve_price
        cloud = self.cloud_profile()
        return cloud_price(cloud.unit_cost, cloud.compute)

    def traffic_params(self) -> TrafficParams:
        return TrafficParams(
            density=self.density_per_km,
            max_density=self.max_density_per_km,
            v_min=self.vehicle_speed_kmh[0] * KMH,
            v_max=self.vehicle_speed_kmh[1] * KMH,
            coverage_radius=self.coverage_radius_m,
            slot_interval=self.slot_interval_s,
            slot_count=self.slot_count,
        )

    def attribute_ranges(self) -> VehicleAttributeRanges:
        return VehicleAttributeRanges(
            idle_compute=(self.idle_compute_gcps[0] * GIGA, self.idle_compute_gcps[1] * GIGA),
            unit_cost=(self.unit_cost_per_gcps[0] / GIGA, self.unit_cost_per_gcps[1] / GIGA),
            fixed_cost=self.fixed_cost,
            link_rate=self.link_rate_bps,
        )

    def energy_params(self, fly_speed: Optional[float] = None) -> EnergyParams:
        """Energy parameters; without an explicit speed the configured (or energy-optimal) one is used."""
        base = EnergyParams(
            p_hover=self.p_hover_w,
            p_a2g=self.p_a2g_w,
            p_fly=self.fly_power_w,
            fly_power_curve=self.fly_power_curve,
            segment_length=self.segment_length_m,
            fly_speed=self.fly_speed_max_mps,
            altitude=self.altitude_m,
            v_min=self.fly_speed_min_mps,
            v_max=self.fly_speed_max_mps,
        )
        if fly_speed is None:
            fly_speed = self.fly_speed_mps
        if fly_speed is None:
            fly_speed = energy_optimal_speed(base)
        return base.model_copy(update={"fly_speed": fly_speed})

    def cost_weights(self) -> CostWeights:
        return CostWeights(omega=self.omega, lambda_p=self.lambda_p)

    def cloud_profile(self) -> ServerProfile:
        return ServerProfile(
            name="cloud",
            unit_cost=self.cloud_unit_cost / GIGA,
            compute=self.cloud_compute_gcps * GIGA,
            link_rate=self.link_rate_bps,
        )

    def fog_profile(self) -> ServerProfile:
        return ServerProfile(
            name="fog",
            unit_cost=self.fog_unit_cost / GIGA,
            compute=self.fog_compute_gcps * GIGA,
            link_rate=self.link_rate_bps,
        )

    def baseline_config(self, scheme: Scheme) -> BaselineConfig:
        return BaselineConfig(
            scheme=scheme,
            cloud_unit_cost=self.cloud_unit_cost,
            cloud_compute=self.cloud_compute_gcps * GIGA,
            fog_unit_cost=self.fog_unit_cost,
            fog_compute=self.fog_compute_gcps * GIGA,
            uav_compute=self.uav_compute_gcps * GIGA,
            paa_speed_seed=self.paa_speed_seed,
        )

    def protocol_settings(self) -> ProtocolSettings:
        return ProtocolSettings(
            deposit_multiplier=self.deposit_multiplier,
            slash_fraction=self.slash_fraction,
            consensus_delay=self.consensus_delay_s,
            phase_window=self.phase_window_s,
            claim_window=self.claim_window_s,
            certificate_ttl=self.certificate_ttl_s,
            key_grace=self.key_grace_s,
        )

    def uav_profile(self) -> ServerProfile:
        return ServerProfile(name="uav", unit_cost=0.0, compute=self.uav_compute_gcps * GIGA,
                             link_rate=self.link_rate_bps)


def _field_paths(error: ValidationError) -> list:
    paths = []
    for item in error.errors():
        path = ".".join(str(part) for part in item.get("loc", ()))
        paths.append(path or "<root>")
    return paths


def load_config(path: Optional[Path] = None, **overrides: Any) -> ScenarioConfig:
    """
    Build a ScenarioConfig from an optional dotenv-style file plus overrides.

    Raises ConfigError carrying the dotted paths of every invalid field.
    """
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"Config file not found: {path}", ["--config"])
    clean: Dict[str, Any] = {key: value for key, value in overrides.items() if value is not None}
    try:
        config = ScenarioConfig(_env_file=path, **clean) if path is not None else ScenarioConfig(**clean)
    except ValidationError as e:
        paths = _field_paths(e)
        messages = "; ".join(f"{p}: {item['msg']}" for p, item in zip(paths, e.errors()))
        logger.error(f"Invalid scenario configuration: {messages}")
        raise ConfigError(f"Invalid configuration: {messages}", paths) from e
    except SettingsError as e:
        logger.error(f"Unreadable scenario configuration: {e}")
        raise ConfigError(f"Unreadable configuration: {e}", ["--config"]) from e
    logger.info(f"Loaded scenario configuration (seed={config.seed}, locations={config.locations})")
    return config


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or os.getenv("SEAL_LOG_LEVEL", "INFO")).upper(), logging.INFO),
        format=LOG_FORMAT,
    )
