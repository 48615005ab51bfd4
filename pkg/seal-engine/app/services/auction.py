"""
Multi-round single-minded reverse combinatorial auction.

Tasks are auctioned one at a time in decreasing urgency. Each round picks the
candidate with the lowest marginal cost factor and, in a second pass, pays it
the critical value: the highest price at which it would still have won.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from app.errors import NoCandidateError, ParameterError
from app.models import (
    CLOUD,
    AuctionEnvironment,
    AuctionInstance,
    AuctionOutcome,
    CombinatorialBid,
    CostWeights,
    Deviation,
    EnergyParams,
    TaskSpec,
    VehicleState,
)
from app.services.cost import feasible, task_completion_time, truthful_price, vehicle_payoff

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Candidate:
    vehicle_id: int
    compute: float
    price: float
    link_rate: float


def sort_by_urgency(tasks: Sequence[TaskSpec]) -> List[TaskSpec]:
    return sorted(tasks, key=lambda t: (-t.urgency, t.id))


def required_compute(task: TaskSpec, link_rate: float, dwell: float) -> Optional[float]:
    """Smallest supply meeting min(deadline, dwell), or None when upload alone is too slow."""
    window = min(task.deadline, dwell)
    slack = window - task.size / link_rate
    if slack <= 0:
        return None
    return task.size * task.intensity / slack


def build_feasible_task_set(
    v: VehicleState,
    tasks_sorted: Sequence[TaskSpec],
    dwell: float,
    demand: Mapping[int, float],
) -> Tuple[int, ...]:
    """
    Greedy feasible bundle for one vehicle.

    Walks tasks in the given (urgency) order and keeps each one whose
    completion time with the demanded supply meets deadline and dwell, while
    the cumulative demand stays within the vehicle's idle compute.
    """
    bundle: List[int] = []
    used = 0.0
    for task in tasks_sorted:
        chi = demand.get(task.id)
        if chi is None or chi <= 0:
            continue
        if used + chi > v.idle_compute:
            continue
        if not feasible(task, task_completion_time(task, chi, v.link_rate), dwell):
            continue
        bundle.append(task.id)
        used += chi
    return tuple(bundle)


def truthful_bid(
    v: VehicleState,
    tasks_sorted: Sequence[TaskSpec],
    dwell: float,
    supply_margin: float = 1.25,
) -> CombinatorialBid:
    """Bid reporting true supply and true cost for every task the vehicle can serve."""
    demand: Dict[int, float] = {}
    for task in tasks_sorted:
        need = required_compute(task, v.link_rate, dwell)
        if need is not None:
            demand[task.id] = need * supply_margin
    bundle = build_feasible_task_set(v, tasks_sorted, dwell, demand)
    return CombinatorialBid(
        vehicle_id=v.id,
        bundle=bundle,
        resources={t: demand[t] for t in bundle},
        prices={t: truthful_price(v.unit_cost, demand[t], v.fixed_cost) for t in bundle},
    )


def _candidate_for(
    task: TaskSpec,
    bid: CombinatorialBid,
    residual: Mapping[int, float],
    env: AuctionEnvironment,
    reserve: float,
) -> Optional[Candidate]:
    chi = bid.resources[task.id]
    price = bid.prices[task.id]
    if price > reserve:
        return None
    if residual.get(bid.vehicle_id, 0.0) < chi:
        return None
    rate = env.link_rate[bid.vehicle_id]
    if not feasible(task, task_completion_time(task, chi, rate), env.dwell.get(bid.vehicle_id, math.inf)):
        return None
    return Candidate(bid.vehicle_id, chi, price, rate)


def build_candidate_set(
    task: TaskSpec,
    bids: Sequence[CombinatorialBid],
    residual: Mapping[int, float],
    env: AuctionEnvironment,
    reserve: float = math.inf,
) -> List[Candidate]:
    """Bidders holding the task in their bundle that meet the deadline and still have capacity for it."""
    candidates = []
    for bid in bids:
        if task.id not in bid.resources:
            continue
        candidate = _candidate_for(task, bid, residual, env, reserve)
        if candidate is not None:
            candidates.append(candidate)
    return sorted(candidates, key=lambda c: c.vehicle_id)


def marginal_cost_factor(
    task: TaskSpec,
    compute: float,
    price: float,
    link_rate: float,
    energy: EnergyParams,
    weights: CostWeights,
) -> float:
    if compute <= 0 or link_rate <= 0:
        raise ParameterError(f"compute and link_rate must be positive, got {compute}, {link_rate}")
    energy_term = task.size * (
        energy.p_hover * task.intensity / compute + (energy.p_a2g + energy.p_hover) / link_rate
    )
    return weights.omega * energy_term + (1.0 - weights.omega) * weights.lambda_p * price


def _ranked(
    task: TaskSpec, candidates: Sequence[Candidate], energy: EnergyParams, weights: CostWeights
) -> List[Tuple[float, int]]:
    scored = [
        (marginal_cost_factor(task, c.compute, c.price, c.link_rate, energy, weights), c.vehicle_id)
        for c in candidates
    ]
    scored.sort()
    return scored


def select_winner(
    task: TaskSpec, candidates: Sequence[Candidate], energy: EnergyParams, weights: CostWeights
) -> int:
    """Lowest marginal cost factor wins; ties go to the lowest vehicle id."""
    if not candidates:
        raise NoCandidateError(f"task {task.id} has no candidate")
    return _ranked(task, candidates, energy, weights)[0][1]


def virtual_price(
    task: TaskSpec, winner: Candidate, critical: Candidate, energy: EnergyParams, weights: CostWeights
) -> float:
    """Price at which the winner's marginal cost factor equals the critical bidder's."""
    scale = weights.omega / ((1.0 - weights.omega) * weights.lambda_p)
    bracket = energy.p_hover * task.intensity * (1.0 / critical.compute - 1.0 / winner.compute) + (
        energy.p_a2g + energy.p_hover
    ) * (1.0 / critical.link_rate - 1.0 / winner.link_rate)
    return scale * task.size * bracket + critical.price


def critical_payment(
    task: TaskSpec,
    winner: int,
    candidates: Sequence[Candidate],
    energy: EnergyParams,
    weights: CostWeights,
    reserve: float,
) -> float:
    """
    Payment for the winner of `task`.

    The critical bidder is whoever wins once the winner is removed. Without one
    the reserve is paid. The result is capped by the reserve and never below
    the winner's own bid.
    """
    own = next((c for c in candidates if c.vehicle_id == winner), None)
    if own is None:
        raise ParameterError(f"vehicle {winner} is not a candidate for task {task.id}")
    others = [c for c in candidates if c.vehicle_id != winner]
    if not others:
        return max(reserve, own.price)
    k = select_winner(task, others, energy, weights)
    critical = next(c for c in others if c.vehicle_id == k)
    price = min(virtual_price(task, own, critical, energy, weights), reserve)
    return max(price, own.price)


def critical_payment_oracle(
    task: TaskSpec,
    winner: int,
    candidates: Sequence[Candidate],
    energy: EnergyParams,
    weights: CostWeights,
    reserve: float,
    rel_tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Supremum of winning prices for `winner`, found by bisection on the selection rule."""
    own = next(c for c in candidates if c.vehicle_id == winner)

    def wins(price: float) -> bool:
        if price > reserve:
            return False
        trial = [replace(c, price=price) if c.vehicle_id == winner else c for c in candidates]
        return select_winner(task, trial, energy, weights) == winner

    if wins(reserve):
        return reserve
    low, high = own.price, reserve
    for _ in range(max_iter):
        if high - low <= rel_tol * max(1.0, abs(high)):
            break
        mid = 0.5 * (low + high)
        if wins(mid):
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)


def run_src_auction(
    tasks: Sequence[TaskSpec],
    bids: Sequence[CombinatorialBid],
    env: AuctionEnvironment,
    reserve: float,
) -> AuctionOutcome:
    """
    Allocate every task and price every vehicle-assigned one.

    Residual capacity starts at the declared capacity (or the bundle's total
    demand when none is declared) and shrinks with each win; candidates must
    fit in it. The pricing pass reuses the candidate set each task saw.
    """
    ordered = sort_by_urgency(tasks)
    by_vehicle = {bid.vehicle_id: bid for bid in bids}
    bundles = {bid.vehicle_id: set(bid.bundle) for bid in bids}
    residual = {
        bid.vehicle_id: env.capacity.get(bid.vehicle_id, sum(bid.resources.values())) for bid in bids
    }
    holders: Dict[int, List[int]] = {}
    for bid in sorted(bids, key=lambda b: b.vehicle_id):
        for task_id in bid.bundle:
            holders.setdefault(task_id, []).append(bid.vehicle_id)

    outcome = AuctionOutcome()
    snapshots: Dict[int, List[Candidate]] = {}
    for task in ordered:
        candidates = []
        for vehicle_id in holders.get(task.id, ()):
            if task.id not in bundles[vehicle_id]:
                continue
            candidate = _candidate_for(task, by_vehicle[vehicle_id], residual, env, reserve)
            if candidate is not None:
                candidates.append(candidate)
        if not candidates:
            outcome.winner_of[task.id] = CLOUD
            continue
        ranked = _ranked(task, candidates, env.energy, env.weights)
        winner = ranked[0][1]
        snapshots[task.id] = candidates
        outcome.mcf_trace[task.id] = [(vehicle_id, value) for value, vehicle_id in ranked]
        outcome.critical_bidder[task.id] = ranked[1][1] if len(ranked) > 1 else None
        outcome.winner_of[task.id] = winner
        outcome.tasks_of.setdefault(winner, []).append(task.id)
        for vehicle_id in holders[task.id]:
            bundles[vehicle_id].discard(task.id)
        residual[winner] -= by_vehicle[winner].resources[task.id]

    for task in ordered:
        winner = outcome.winner_of[task.id]
        if winner == CLOUD:
            continue
        outcome.critical_payment[task.id] = critical_payment(
            task, winner, snapshots[task.id], env.energy, env.weights, reserve
        )

    outcome.winners = sorted(outcome.tasks_of)
    logger.info(
        f"Auction allocated {len(outcome.critical_payment)}/{len(ordered)} tasks to "
        f"{len(outcome.winners)} vehicles, {len(ordered) - len(outcome.critical_payment)} to the fallback"
    )
    return outcome


def realized_payoff(
    outcome: AuctionOutcome,
    vehicle: VehicleState,
    truthful: CombinatorialBid,
    reported: Optional[CombinatorialBid] = None,
) -> float:
    """
    Total payoff of `vehicle` under `outcome`.

    A task won with more supply than the truthful bid holds cannot be served
    from the vehicle's idle compute: the vehicle bears the cost of the promised
    supply and forfeits the payment. Reporting less keeps the truthful cost.
    """
    reported = reported or truthful
    total = 0.0
    for task_id in outcome.tasks_of.get(vehicle.id, []):
        true_chi = truthful.resources.get(task_id)
        claimed = reported.resources[task_id]
        if true_chi is None or claimed > true_chi:
            total -= truthful_price(vehicle.unit_cost, claimed, vehicle.fixed_cost)
            continue
        total += vehicle_payoff(
            outcome.critical_payment[task_id], true_chi, vehicle.unit_cost, vehicle.fixed_cost, True
        )
    return total


def payoff_under_deviation(instance: AuctionInstance, vehicle_id: int, deviated_bid: Deviation) -> float:
    """Rerun the auction with one task entry of one bid replaced and return that vehicle's payoff."""
    truthful = instance.bid_of(vehicle_id)
    if deviated_bid.task_id not in truthful.resources:
        raise ParameterError(f"task {deviated_bid.task_id} is not in vehicle {vehicle_id}'s bundle")
    reported = truthful.model_copy(
        update={
            "resources": {**truthful.resources, deviated_bid.task_id: deviated_bid.compute},
            "prices": {**truthful.prices, deviated_bid.task_id: deviated_bid.price},
        }
    )
    bids = [reported if bid.vehicle_id == vehicle_id else bid for bid in instance.bids]
    outcome = run_src_auction(instance.tasks, bids, instance.env, instance.reserve)
    return realized_payoff(outcome, instance.vehicle(vehicle_id), truthful, reported)


def truthful_payoff(instance: AuctionInstance, vehicle_id: int) -> float:
    outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
    return realized_payoff(outcome, instance.vehicle(vehicle_id), instance.bid_of(vehicle_id))
