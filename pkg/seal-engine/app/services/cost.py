"""
Task timing, UAV energy and cost, vehicle payoffs, and the per-location
objective with its feasibility constraints.
"""

import itertools
import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from app.errors import ParameterError
from app.models import (
    CLOUD,
    AuctionEnvironment,
    AuctionOutcome,
    CombinatorialBid,
    CostWeights,
    EnergyBreakdown,
    EnergyParams,
    ObjectiveResult,
    TaskSpec,
)

logger = logging.getLogger(__name__)

Assignment = Tuple[TaskSpec, float, float]


def transmission_time(task: TaskSpec, link_rate: float) -> float:
    if link_rate <= 0:
        raise ParameterError(f"link_rate must be positive, got {link_rate}")
    return task.size / link_rate


def task_completion_time(task: TaskSpec, compute: float, link_rate: float) -> float:
    """Upload plus computation time; the result downlink is neglected."""
    if compute <= 0 or link_rate <= 0:
        raise ParameterError(f"compute and link_rate must be positive, got {compute}, {link_rate}")
    return task.size * (1.0 / link_rate + task.intensity / compute)


def feasible(task: TaskSpec, T: float, dwell: float) -> bool:
    return T <= min(task.deadline, dwell)


def flight_power(params: EnergyParams, speed: Optional[float] = None) -> float:
    v = params.fly_speed if speed is None else speed
    if params.fly_power_curve is None:
        return params.p_fly
    c1, c2 = params.fly_power_curve
    return c1 * v ** 3 + c2 / v


def flight_energy(params: EnergyParams, speed: Optional[float] = None) -> float:
    v = params.fly_speed if speed is None else speed
    return flight_power(params, v) * params.segment_length / v


def energy_optimal_speed(params: EnergyParams) -> float:
    """Speed in [v_min, v_max] minimising the energy to cover the segment."""
    if params.fly_power_curve is None:
        # constant power: energy falls with speed
        return params.v_max
    c1, c2 = params.fly_power_curve
    return min(params.v_max, max(params.v_min, (c2 / c1) ** 0.25))


def segment_energy_breakdown(params: EnergyParams, assignments: Iterable[Assignment]) -> EnergyBreakdown:
    breakdown = EnergyBreakdown(flight=flight_energy(params))
    hover = 0.0
    transmit = 0.0
    for task, compute, link_rate in assignments:
        hover += task_completion_time(task, compute, link_rate)
        transmit += transmission_time(task, link_rate)
    breakdown.hover = params.p_hover * hover
    breakdown.transmit = params.p_a2g * transmit
    return breakdown


def segment_energy(params: EnergyParams, assignments: Iterable[Assignment]) -> float:
    """Flight + hover over every assigned task + transmit energy, in joules."""
    return segment_energy_breakdown(params, assignments).total


def uav_total_cost(energy: float, payments: Sequence[float], weights: CostWeights) -> float:
    if any(p < 0 for p in payments):
        raise ParameterError("payments must be non-negative")
    return weights.omega * energy + (1.0 - weights.omega) * weights.lambda_p * sum(payments)


def truthful_price(unit_cost: float, compute: float, fixed_cost: float = 0.0) -> float:
    """Private monetary cost of supplying `compute` cycles/s."""
    return unit_cost * compute + fixed_cost


def cloud_price(unit_cost: float, compute: float) -> float:
    """Per-task price of a fixed server (cloud or fog)."""
    if unit_cost < 0 or compute <= 0:
        raise ParameterError(f"invalid server profile: unit_cost={unit_cost}, compute={compute}")
    return unit_cost * compute


def vehicle_payoff(payment: float, compute: float, unit_cost: float, fixed_cost: float, won: bool) -> float:
    if compute < 0:
        raise ParameterError(f"compute must be non-negative, got {compute}")
    if not won:
        return 0.0
    return payment - truthful_price(unit_cost, compute, fixed_cost)


def _infeasible(violated: str, task_id: Optional[int]) -> ObjectiveResult:
    return ObjectiveResult(value=math.inf, feasible=False, violated=violated, task_id=task_id)


def objective_value(
    allocation: AuctionOutcome,
    tasks: Sequence[TaskSpec],
    bids: Sequence[CombinatorialBid],
    env: AuctionEnvironment,
    weights: Optional[CostWeights] = None,
    payments: Optional[Mapping[int, float]] = None,
) -> ObjectiveResult:
    """
    Evaluate the per-location objective for an allocation.

    Payments default to the allocation's critical payments; pass the bid prices
    to compare allocations at fixed payments. Tasks routed to the fallback
    server are charged its price and still occupy hover time.

    Constraint ids: deadline (completion within deadline and dwell),
    rationality (payment covers the bid), single_assignment, bundle (assigned
    inside a submitted bundle with a non-negative payment) and capacity.
    """
    weights = weights or env.weights
    payments = allocation.critical_payment if payments is None else payments
    by_vehicle = {bid.vehicle_id: bid for bid in bids}
    known = {task.id for task in tasks}

    for task_id in allocation.winner_of:
        if task_id not in known:
            return _infeasible("single_assignment", task_id)

    used: Dict[int, float] = {}
    assignments: List[Assignment] = []
    paid: List[float] = []
    for task in tasks:
        who = allocation.winner_of.get(task.id)
        if who is None:
            return _infeasible("single_assignment", task.id)
        if who == CLOUD:
            server = env.fallback
            assignments.append((task, server.compute, server.link_rate))
            paid.append(server.price)
            continue
        bid = by_vehicle.get(who)
        if bid is None or task.id not in bid.resources:
            return _infeasible("bundle", task.id)
        compute = bid.resources[task.id]
        rate = env.link_rate[who]
        if not feasible(task, task_completion_time(task, compute, rate), env.dwell.get(who, math.inf)):
            return _infeasible("deadline", task.id)
        payment = payments.get(task.id)
        if payment is None or payment < 0:
            return _infeasible("bundle", task.id)
        if payment < bid.prices[task.id] - 1e-12:
            return _infeasible("rationality", task.id)
        used[who] = used.get(who, 0.0) + compute
        if used[who] > env.capacity.get(who, math.inf) * (1 + 1e-12):
            return _infeasible("capacity", task.id)
        assignments.append((task, compute, rate))
        paid.append(payment)

    energy = segment_energy(env.energy, assignments)
    return ObjectiveResult(value=uav_total_cost(energy, paid, weights))


def enumerate_optimal_allocation(
    tasks: Sequence[TaskSpec],
    bids: Sequence[CombinatorialBid],
    env: AuctionEnvironment,
    reserve: float = math.inf,
) -> Tuple[ObjectiveResult, Dict[int, object]]:
    """
    Exhaustive minimum of the objective with payments fixed to bid prices.

    Every task goes to one of its feasible bidders (price at most the reserve),
    or to the fallback server when it has none. Meant for tiny instances.
    """
    options: List[List[object]] = []
    for task in tasks:
        choices: List[object] = []
        for bid in bids:
            if task.id not in bid.resources or bid.prices[task.id] > reserve:
                continue
            T = task_completion_time(task, bid.resources[task.id], env.link_rate[bid.vehicle_id])
            if feasible(task, T, env.dwell.get(bid.vehicle_id, math.inf)):
                choices.append(bid.vehicle_id)
        options.append(choices or [CLOUD])

    prices = {}
    for bid in bids:
        for task_id, price in bid.prices.items():
            prices[(bid.vehicle_id, task_id)] = price

    best = ObjectiveResult(value=math.inf, feasible=False)
    best_map: Dict[int, object] = {}
    for combo in itertools.product(*options):
        winner_of = {task.id: who for task, who in zip(tasks, combo)}
        fixed = {task.id: prices[(who, task.id)] for task, who in zip(tasks, combo) if who != CLOUD}
        result = objective_value(AuctionOutcome(winner_of=winner_of), tasks, bids, env, payments=fixed)
        if result.feasible and result.value < best.value:
            best, best_map = result, winner_of
    logger.debug(f"Enumerated {math.prod(len(o) for o in options)} allocations, best {best.value:.6f}")
    return best, best_map
