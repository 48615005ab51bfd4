"""
Vehicular traffic around a sensing location: density-speed coupling, flow
counts per slot, residual dwell time, and synthetic or trace-driven vehicle
populations.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.errors import ParameterError, TraceFormatError
from app.models import PopulationTrace, TrafficParams, VehicleAttributeRanges, VehicleState

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("slot", "id", "distance_m", "heading", "speed_mps", "idle_compute_cps", "unit_cost")
OPTIONAL_TRACE_COLUMNS = ("fixed_cost", "link_rate_bps")


def avg_vehicle_speed(params: TrafficParams) -> float:
    """Average speed in m/s under the linear speed-density relationship."""
    if params.density < 0 or params.max_density <= 0:
        raise ParameterError("density must be >= 0 and max_density > 0")
    return max(params.v_min, (1.0 - params.density / params.max_density) * params.v_max)


def arrival_rate(params: TrafficParams) -> float:
    """Poisson arrival rate in vehicles/s (density is per km)."""
    return params.density / 1000.0 * avg_vehicle_speed(params)


def vehicle_count_step(prev_count: float, inflow: float, leave_ratio: float, slot_index: int) -> float:
    if not 0.0 <= leave_ratio <= 1.0:
        raise ParameterError(f"leave_ratio must lie in [0, 1], got {leave_ratio}")
    if slot_index < 1:
        raise ParameterError(f"slot_index starts at 1, got {slot_index}")
    if slot_index == 1:
        return inflow * (1.0 - leave_ratio)
    return (inflow + prev_count) * (1.0 - leave_ratio)


def residual_dwell_time(v: VehicleState, coverage_radius: float, avg_speed: float) -> float:
    if avg_speed <= 0:
        raise ParameterError(f"avg_speed must be positive, got {avg_speed}")
    return (coverage_radius + v.heading * v.distance_to_uav) / avg_speed


def _draw_vehicle(
    rng: np.random.Generator,
    vehicle_id: int,
    coverage_radius: float,
    speed: float,
    ranges: VehicleAttributeRanges,
) -> VehicleState:
    # Draw order is part of the reproducibility contract.
    distance = float(rng.uniform(0.0, coverage_radius))
    heading = 1 if rng.random() < 0.5 else -1
    idle = float(rng.uniform(*ranges.idle_compute))
    unit_cost = float(rng.uniform(*ranges.unit_cost))
    return VehicleState(
        id=vehicle_id,
        distance_to_uav=distance,
        heading=heading,
        speed=speed,
        idle_compute=idle,
        unit_cost=unit_cost,
        fixed_cost=ranges.fixed_cost,
        link_rate=ranges.link_rate,
    )


def advance_population(
    vehicles: Sequence[VehicleState], dt: float, coverage_radius: float
) -> Tuple[List[VehicleState], List[VehicleState]]:
    """Move every vehicle speed*dt along its heading; returns (remaining, departed)."""
    remaining: List[VehicleState] = []
    departed: List[VehicleState] = []
    for vehicle in vehicles:
        step = vehicle.speed * dt
        if vehicle.heading == 1:
            distance = vehicle.distance_to_uav - step
            heading = 1
            if distance < 0:
                # passed the centre
                distance, heading = -distance, -1
        else:
            distance, heading = vehicle.distance_to_uav + step, -1
        if distance > coverage_radius:
            departed.append(vehicle)
            continue
        remaining.append(vehicle.model_copy(update={"distance_to_uav": distance, "heading": heading}))
    return remaining, departed


def empirical_leave_ratio(departed: int, present: int) -> float:
    """Observed departure fraction for one slot."""
    if present <= 0:
        return 0.0
    return departed / present


def spawn_population(
    seed: int,
    params: TrafficParams,
    horizon: int,
    ranges: Optional[VehicleAttributeRanges] = None,
    rate: Optional[float] = None,
) -> PopulationTrace:
    """
    Generate per-slot vehicle sets with Poisson arrivals.

    Args:
        seed: generator seed; identical seeds give identical traces
        params: traffic state
        horizon: number of slots to simulate (at most params.slot_count)
        ranges: attribute sampling ranges, defaults to the reference ranges
        rate: arrivals per second, defaults to density * average speed
    """
    if horizon > params.slot_count:
        raise ParameterError(f"horizon {horizon} exceeds slot_count {params.slot_count}")
    ranges = ranges or VehicleAttributeRanges()
    rng = np.random.default_rng(seed)
    speed = avg_vehicle_speed(params)
    lam = arrival_rate(params) if rate is None else rate
    if lam < 0:
        raise ParameterError(f"arrival rate must be non-negative, got {lam}")

    trace = PopulationTrace()
    present: List[VehicleState] = []
    next_id = 0
    for slot in range(horizon):
        present, departed = advance_population(present, params.slot_interval, params.coverage_radius)
        arrivals = int(rng.poisson(lam * params.slot_interval))
        for offset in range(arrivals):
            present.append(_draw_vehicle(rng, next_id + offset, params.coverage_radius, speed, ranges))
        next_id += arrivals
        trace.slots.append(list(present))
        trace.slot_ids.append(slot)
        trace.arrivals.append(arrivals)
        trace.departures.append(len(departed))
    logger.info(f"Spawned {next_id} vehicles over {horizon} slots (rate {lam:.3f}/s)")
    return trace


def sample_vehicles(
    rng: np.random.Generator,
    params: TrafficParams,
    ranges: Optional[VehicleAttributeRanges] = None,
    count: Optional[int] = None,
) -> List[VehicleState]:
    """
    Snapshot of the vehicles under the coverage disk at one location.

    Without an explicit count the population is density times the road length
    under the disk (2R), floored.
    """
    ranges = ranges or VehicleAttributeRanges()
    if count is None:
        count = int(math.floor(params.density * 2.0 * params.coverage_radius / 1000.0 + 1e-9))
    speed = avg_vehicle_speed(params)
    return [_draw_vehicle(rng, i, params.coverage_radius, speed, ranges) for i in range(count)]


def load_trace(
    path: Path,
    coverage_radius: float,
    default_link_rate: float = 6e6,
) -> PopulationTrace:
    """
    Load a CSV mobility trace into per-slot vehicle sets.

    Rows farther than coverage_radius from the UAV are dropped and counted.
    Blank lines are skipped. Malformed rows raise TraceFormatError with the
    1-based file line number.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Trace file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        logger.info(f"Trace {path} is empty")
        return PopulationTrace()

    missing = [column for column in TRACE_COLUMNS if column not in frame.columns]
    if missing:
        raise TraceFormatError(f"missing columns {missing}", line=1)

    numeric = {}
    for column in TRACE_COLUMNS + tuple(c for c in OPTIONAL_TRACE_COLUMNS if c in frame.columns):
        numeric[column] = pd.to_numeric(frame[column], errors="coerce")
    # blank lines stay in the frame so row i is file line i + 2
    blank = frame.fillna("").apply(lambda column: column.str.strip() == "").all(axis=1)

    slots: dict = {}
    dropped = 0
    for row in range(len(frame)):
        if blank.iloc[row]:
            continue
        line = row + 2
        values = {column: numeric[column].iloc[row] for column in numeric}
        bad = [column for column in TRACE_COLUMNS if pd.isna(values[column])]
        if bad:
            raise TraceFormatError(f"non-numeric value in {bad}", line=line)
        if values["heading"] not in (1, -1):
            raise TraceFormatError(f"heading must be 1 or -1, got {values['heading']}", line=line)
        if values["distance_m"] > coverage_radius:
            dropped += 1
            continue
        fixed_cost = values.get("fixed_cost", 0.0)
        link_rate = values.get("link_rate_bps", default_link_rate)
        try:
            vehicle = VehicleState(
                id=int(values["id"]),
                distance_to_uav=float(values["distance_m"]),
                heading=int(values["heading"]),
                speed=float(values["speed_mps"]),
                idle_compute=float(values["idle_compute_cps"]),
                unit_cost=float(values["unit_cost"]),
                fixed_cost=0.0 if pd.isna(fixed_cost) else float(fixed_cost),
                link_rate=default_link_rate if pd.isna(link_rate) else float(link_rate),
            )
        except ValidationError as e:
            raise TraceFormatError(str(e.errors()[0]["msg"]), line=line) from e
        slots.setdefault(int(values["slot"]), []).append(vehicle)

    if dropped:
        logger.warning(f"Dropped {dropped} trace rows outside the {coverage_radius} m coverage radius")
    ordered = sorted(slots)
    return PopulationTrace(slots=[slots[s] for s in ordered], slot_ids=ordered, dropped=dropped)
