"""
Scenario runs and parameter sweeps.

A run evaluates SEAL at every sensing location (auction, metrics and,
optionally, the exchange round). A sweep varies one axis and evaluates the
chosen schemes for several seeds, producing a long-format table.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from app.config import ScenarioConfig
from app.errors import ParameterError
from app.models import AllocationReport, LocationMetrics, LocationReport, PopulationTrace, Scheme
from app.services.auction import run_src_auction
from app.services.baselines import evaluate_allocation, run_baseline
from app.services.exchange import run_protocol
from app.services.scenario import build_instance, location_seed

logger = logging.getLogger(__name__)

LOCATION_COLUMNS = list(LocationMetrics.model_fields)
SWEEP_COLUMNS = ["axis", "axis_value", "scheme", "seed", "metric", "value"]

# sweep axis -> config field
AXES: Dict[str, str] = {
    "density": "density_per_km",
    "tasks": "task_count",
    "locations": "locations",
    "bidders": "vehicle_count",
}
_INTEGER_AXES = {"tasks", "locations", "bidders"}

# metrics summed over locations; mean_delay_s is averaged
SUMMED_METRICS = (
    "uav_cost", "energy_j", "flight_energy_j", "hover_energy_j", "transmit_energy_j",
    "journey_time_s", "total_payment", "vehicle_tasks", "cloud_tasks", "deadline_misses",
)


def location_metrics(location: int, tasks: int, vehicles: int, report: AllocationReport) -> LocationMetrics:
    return LocationMetrics(
        location=location,
        tasks=tasks,
        vehicles=vehicles,
        vehicle_tasks=report.vehicle_tasks,
        cloud_tasks=report.cloud_tasks,
        uav_cost=report.uav_cost,
        energy_j=report.energy.total,
        flight_energy_j=report.energy.flight,
        hover_energy_j=report.energy.hover,
        transmit_energy_j=report.energy.transmit,
        mean_delay_s=report.mean_delay,
        journey_time_s=report.journey_time,
        total_payment=report.total_payment,
        deadline_misses=report.deadline_misses,
    )


def evaluate_location(
    config: ScenarioConfig, location: int, trace: Optional[PopulationTrace] = None
) -> LocationReport:
    instance = build_instance(config, location, trace)
    outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
    allocation = evaluate_allocation(
        Scheme.SEAL, instance, outcome.winner_of, outcome.critical_payment,
        instance.env.energy.fly_speed, flagged=outcome.cloud_tasks(),
    )
    protocol = None
    if config.run_protocol:
        protocol = run_protocol(
            instance, config.adversary, config.protocol_settings(), seed=location_seed(config.seed, location)
        )
    return LocationReport(
        location=location,
        seed=config.seed,
        metrics=location_metrics(location, len(instance.tasks), len(instance.vehicles), allocation),
        outcome=outcome.public_view(),
        protocol=protocol,
    )


def run_scenario(
    config: ScenarioConfig, trace: Optional[PopulationTrace] = None, progress: bool = False
) -> List[LocationReport]:
    reports = []
    for location in tqdm(range(config.locations), desc="locations", disable=not progress):
        reports.append(evaluate_location(config, location, trace))
    logger.info(f"Evaluated {len(reports)} locations (seed={config.seed})")
    return reports


def locations_frame(reports: Sequence[LocationReport]) -> pd.DataFrame:
    return pd.DataFrame([r.metrics.model_dump() for r in reports], columns=LOCATION_COLUMNS)


def write_locations_csv(reports: Sequence[LocationReport], path: Path) -> None:
    locations_frame(reports).to_csv(path, index=False)


def axis_values(axis: str, start: float, stop: float, step: float) -> List[float]:
    """Inclusive arithmetic range; raises ParameterError when it is empty."""
    if axis not in AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; expected one of {sorted(AXES)}")
    if step <= 0 or stop < start:
        raise ParameterError(f"empty sweep range {start}..{stop} step {step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    values = [start + k * step for k in range(count)]
    if axis in _INTEGER_AXES:
        values = [int(round(v)) for v in values]
    return values


def _sweep_point(job: Tuple[Dict[str, Any], str, float, int, Tuple[str, ...]]) -> List[Dict[str, Any]]:
    """Evaluate every scheme at one (axis value, seed); runs in a worker process."""
    base, axis, value, seed, schemes = job
    config = ScenarioConfig(**{**base, AXES[axis]: value, "seed": seed, "run_protocol": False})
    totals = {scheme: {metric: 0.0 for metric in SUMMED_METRICS} for scheme in schemes}
    delays = {scheme: [] for scheme in schemes}
    for location in range(config.locations):
        instance = build_instance(config, location)
        for name in schemes:
            report = run_baseline(config.baseline_config(Scheme(name)), instance)
            metrics = location_metrics(location, len(instance.tasks), len(instance.vehicles), report)
            for metric in SUMMED_METRICS:
                totals[name][metric] += getattr(metrics, metric)
            delays[name].append(metrics.mean_delay_s)
    rows = []
    for name in schemes:
        values = dict(totals[name])
        values["mean_delay_s"] = sum(delays[name]) / len(delays[name]) if delays[name] else 0.0
        for metric in sorted(values):
            rows.append({
                "axis": axis, "axis_value": value, "scheme": name, "seed": seed,
                "metric": metric, "value": values[metric],
            })
    return rows


def run_sweep(
    config: ScenarioConfig,
    axis: str,
    values: Sequence[float],
    schemes: Sequence[Scheme],
    seeds: Sequence[int],
    workers: int = 1,
    locations: Optional[int] = None,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Long-format results, one row per (axis value, scheme, seed, metric).

    Rows are merged in (value, seed) order whatever the worker count.
    """
    if not values:
        raise ParameterError("sweep needs at least one axis value")
    if not schemes:
        raise ParameterError("sweep needs at least one scheme")
    base = config.model_dump()
    if locations is not None:
        base["locations"] = locations
    names = tuple(Scheme(s).value for s in schemes)
    jobs = [(base, axis, value, seed, names) for value in values for seed in seeds]
    logger.info(f"Sweeping {axis} over {len(values)} values x {len(seeds)} seeds ({len(jobs)} jobs)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_sweep_point, jobs), total=len(jobs), desc="sweep", disable=not progress))
    else:
        results = [_sweep_point(job) for job in tqdm(jobs, desc="sweep", disable=not progress)]
    rows = [row for chunk in results for row in chunk]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
