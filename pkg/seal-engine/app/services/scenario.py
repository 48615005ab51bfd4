"""
Per-location auction instances built from a ScenarioConfig.

Every location draws from its own random streams keyed by (seed, location,
stream), so a location looks the same whatever else is swept, and task i is
the same task whether J is 190 or 205.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from app.config import ScenarioConfig
from app.models import AuctionEnvironment, AuctionInstance, PopulationTrace, TaskSpec, VehicleState
from app.services.auction import sort_by_urgency, truthful_bid
from app.services.mobility import avg_vehicle_speed, residual_dwell_time, sample_vehicles

logger = logging.getLogger(__name__)

STREAM_TASK_COUNT = 0
STREAM_TASKS = 1
STREAM_VEHICLES = 2
STREAM_PROTOCOL = 3


def location_rng(seed: int, location: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, location, stream])


def location_seed(seed: int, location: int) -> int:
    return int(np.random.SeedSequence([seed, location, STREAM_PROTOCOL]).generate_state(1)[0])


def task_count_for(config: ScenarioConfig, location: int) -> int:
    if config.task_count is not None:
        return config.task_count
    low, high = config.tasks_per_location
    return int(location_rng(config.seed, location, STREAM_TASK_COUNT).integers(low, high + 1))


def generate_tasks(rng: np.random.Generator, config: ScenarioConfig, count: int) -> List[TaskSpec]:
    # one task at a time so the first k tasks do not depend on the count
    size_low, size_high = config.task_size_bits
    tasks = []
    for task_id in range(count):
        size = rng.uniform(size_low, size_high)
        deadline = rng.uniform(*config.deadline_s)
        urgency = rng.uniform(*config.urgency)
        tasks.append(TaskSpec(
            id=task_id, size=size, urgency=urgency, deadline=deadline,
            intensity=config.intensity_cycles_per_bit,
        ))
    return tasks


def dwell_times(config: ScenarioConfig, vehicles: Sequence[VehicleState]) -> dict:
    fallback_speed = avg_vehicle_speed(config.traffic_params())
    return {
        v.id: residual_dwell_time(v, config.coverage_radius_m, v.speed if v.speed > 0 else fallback_speed)
        for v in vehicles
    }


def assemble_instance(
    config: ScenarioConfig, tasks: Sequence[TaskSpec], vehicles: Sequence[VehicleState]
) -> AuctionInstance:
    """Truthful bids of every vehicle plus what the UAV observes about them."""
    ordered = sort_by_urgency(tasks)
    dwell = dwell_times(config, vehicles)
    bids = [truthful_bid(v, ordered, dwell[v.id], config.supply_margin) for v in vehicles]
    env = AuctionEnvironment(
        dwell=dwell,
        link_rate={v.id: v.link_rate for v in vehicles},
        capacity={v.id: v.idle_compute for v in vehicles},
        energy=config.energy_params(),
        weights=config.cost_weights(),
        fallback=config.cloud_profile(),
    )
    return AuctionInstance(tasks=list(tasks), bids=bids, vehicles=list(vehicles), env=env, reserve=config.reserve)


def build_instance(
    config: ScenarioConfig, location: int, trace: Optional[PopulationTrace] = None
) -> AuctionInstance:
    """
    The auction at one sensing location.

    With a trace, location n uses the trace's slot n (cycling); otherwise a
    vehicle snapshot is sampled from the configured density.
    """
    tasks = generate_tasks(location_rng(config.seed, location, STREAM_TASKS), config, task_count_for(config, location))
    if trace is not None and trace.slots:
        vehicles = trace.slots[location % len(trace.slots)]
    else:
        vehicles = sample_vehicles(
            location_rng(config.seed, location, STREAM_VEHICLES),
            config.traffic_params(),
            config.attribute_ranges(),
            count=config.vehicle_count,
        )
    instance = assemble_instance(config, tasks, vehicles)
    logger.debug(f"Location {location}: {len(tasks)} tasks, {len(vehicles)} vehicles")
    return instance


def random_auction_instance(
    rng: np.random.Generator, config: ScenarioConfig, task_count: int, vehicle_count: int
) -> AuctionInstance:
    """Instance drawn from one generator; used by the property suites."""
    tasks = generate_tasks(rng, config, task_count)
    vehicles = sample_vehicles(rng, config.traffic_params(), config.attribute_ranges(), count=vehicle_count)
    return assemble_instance(config, tasks, vehicles)
