"""
Comparison schemes for offloading efficiency.

Vehicle-based baselines assign tasks greedily in urgency order under a single
criterion and pay winners their bids. Server-based schemes send every task to
one fixed server; LOCAL processes everything on the UAV itself.
"""

import logging
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.models import (
    CLOUD,
    AllocationReport,
    Assignee,
    AuctionInstance,
    BaselineConfig,
    EnergyBreakdown,
    Scheme,
    ServerProfile,
    TaskSpec,
)
from app.services.auction import Candidate, build_candidate_set, run_src_auction, sort_by_urgency
from app.services.cost import flight_energy, task_completion_time, transmission_time, uav_total_cost

logger = logging.getLogger(__name__)

GIGA = 1e9

VEHICLE_SCHEMES = (Scheme.SEAL, Scheme.EAA, Scheme.DAA, Scheme.PAA)


def assignment_energy(task: TaskSpec, candidate: Candidate, p_hover: float, p_a2g: float) -> float:
    """Hover plus transmit energy of serving `task` with `candidate`."""
    return task.size * (p_hover * task.intensity / candidate.compute + (p_a2g + p_hover) / candidate.link_rate)


def _criterion(scheme: Scheme, task: TaskSpec, instance: AuctionInstance) -> Callable[[Candidate], float]:
    energy = instance.env.energy
    if scheme == Scheme.EAA:
        return lambda c: assignment_energy(task, c, energy.p_hover, energy.p_a2g)
    if scheme == Scheme.DAA:
        return lambda c: task_completion_time(task, c.compute, c.link_rate)
    if scheme == Scheme.PAA:
        return lambda c: c.price
    raise ValueError(f"{scheme.value} is not a greedy vehicle scheme")


def scheme_speed(config: BaselineConfig, instance: AuctionInstance) -> float:
    energy = instance.env.energy
    if config.scheme == Scheme.EAA:
        return energy.v_min
    if config.scheme == Scheme.DAA:
        return energy.v_max
    if config.scheme == Scheme.PAA:
        return float(np.random.default_rng(config.paa_speed_seed).uniform(energy.v_min, energy.v_max))
    return energy.fly_speed


def greedy_assignment(scheme: Scheme, instance: AuctionInstance):
    """Per-task argmin of the scheme's criterion over feasible candidates; ties to the lowest id."""
    residual = {
        bid.vehicle_id: instance.env.capacity.get(bid.vehicle_id, sum(bid.resources.values()))
        for bid in instance.bids
    }
    by_vehicle = {bid.vehicle_id: bid for bid in instance.bids}
    winner_of: Dict[int, Assignee] = {}
    payments: Dict[int, float] = {}
    flagged: List[int] = []
    for task in sort_by_urgency(instance.tasks):
        candidates = build_candidate_set(task, instance.bids, residual, instance.env, instance.reserve)
        if not candidates:
            winner_of[task.id] = CLOUD
            flagged.append(task.id)
            continue
        score = _criterion(scheme, task, instance)
        best = min(candidates, key=lambda c: (score(c), c.vehicle_id))
        winner_of[task.id] = best.vehicle_id
        payments[task.id] = best.price
        residual[best.vehicle_id] -= by_vehicle[best.vehicle_id].resources[task.id]
    return winner_of, payments, flagged


def evaluate_allocation(
    scheme: Scheme,
    instance: AuctionInstance,
    winner_of: Mapping[int, Assignee],
    payments: Mapping[int, float],
    fly_speed: float,
    fallback: Optional[ServerProfile] = None,
    flagged: Sequence[int] = (),
) -> AllocationReport:
    """Energy split, UAV cost, delays and payments of an allocation that mixes vehicles and a server."""
    env = instance.env
    server = fallback or env.fallback
    energy_params = env.energy.model_copy(update={"fly_speed": fly_speed})
    hover = 0.0
    transmit = 0.0
    delays: List[float] = []
    paid: List[float] = []
    misses = 0
    for task in instance.tasks:
        who = winner_of[task.id]
        if who == CLOUD:
            compute, rate, price = server.compute, server.link_rate, server.price
        else:
            compute = instance.bid_of(who).resources[task.id]
            rate = env.link_rate[who]
            price = payments[task.id]
        delay = task_completion_time(task, compute, rate)
        hover += delay
        transmit += transmission_time(task, rate)
        delays.append(delay)
        paid.append(price)
        if delay > task.deadline:
            misses += 1
    breakdown = EnergyBreakdown(
        flight=flight_energy(energy_params),
        hover=energy_params.p_hover * hover,
        transmit=energy_params.p_a2g * transmit,
    )
    cloud_count = sum(1 for who in winner_of.values() if who == CLOUD)
    return AllocationReport(
        scheme=scheme,
        winner_of=dict(winner_of),
        payments={t: p for t, p in payments.items() if winner_of.get(t) != CLOUD},
        fly_speed=fly_speed,
        energy=breakdown,
        uav_cost=uav_total_cost(breakdown.total, paid, env.weights),
        total_payment=math.fsum(paid),
        mean_delay=float(np.mean(delays)) if delays else 0.0,
        journey_time=energy_params.segment_length / fly_speed + math.fsum(delays),
        vehicle_tasks=len(winner_of) - cloud_count,
        cloud_tasks=cloud_count,
        deadline_misses=misses,
        flagged=list(flagged),
    )


def _local_report(config: BaselineConfig, instance: AuctionInstance, fly_speed: float) -> AllocationReport:
    """Tasks run back to back on the UAV processor; each waits for the ones before it."""
    env = instance.env
    energy_params = env.energy.model_copy(update={"fly_speed": fly_speed})
    finish = 0.0
    delays: List[float] = []
    misses = 0
    for task in sort_by_urgency(instance.tasks):
        finish += task.size * task.intensity / config.uav_compute
        delays.append(finish)
        if finish > task.deadline:
            misses += 1
    breakdown = EnergyBreakdown(flight=flight_energy(energy_params), hover=energy_params.p_hover * finish)
    return AllocationReport(
        scheme=Scheme.LOCAL,
        fly_speed=fly_speed,
        energy=breakdown,
        uav_cost=uav_total_cost(breakdown.total, [], env.weights),
        total_payment=0.0,
        mean_delay=float(np.mean(delays)) if delays else 0.0,
        journey_time=energy_params.segment_length / fly_speed + math.fsum(delays),
        vehicle_tasks=0,
        cloud_tasks=0,
        deadline_misses=misses,
    )


def server_profile(config: BaselineConfig, link_rate: float) -> ServerProfile:
    if config.scheme == Scheme.FOG:
        return ServerProfile(name="fog", unit_cost=config.fog_unit_cost / GIGA, compute=config.fog_compute,
                             link_rate=link_rate)
    return ServerProfile(name="cloud", unit_cost=config.cloud_unit_cost / GIGA, compute=config.cloud_compute,
                         link_rate=link_rate)


def run_baseline(config: BaselineConfig, instance: AuctionInstance) -> AllocationReport:
    speed = scheme_speed(config, instance)
    if config.scheme == Scheme.SEAL:
        outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
        report = evaluate_allocation(
            Scheme.SEAL, instance, outcome.winner_of, outcome.critical_payment, speed,
            flagged=outcome.cloud_tasks(),
        )
    elif config.scheme in (Scheme.EAA, Scheme.DAA, Scheme.PAA):
        winner_of, payments, flagged = greedy_assignment(config.scheme, instance)
        report = evaluate_allocation(config.scheme, instance, winner_of, payments, speed, flagged=flagged)
    elif config.scheme in (Scheme.CLOUD, Scheme.FOG):
        server = server_profile(config, instance.env.fallback.link_rate)
        winner_of = {task.id: CLOUD for task in instance.tasks}
        report = evaluate_allocation(config.scheme, instance, winner_of, {}, speed, fallback=server)
    else:
        report = _local_report(config, instance, speed)
    logger.debug(
        f"{report.scheme.value}: cost={report.uav_cost:.3f} energy={report.energy.total:.1f} J "
        f"vehicle_tasks={report.vehicle_tasks} cloud_tasks={report.cloud_tasks}"
    )
    return report
