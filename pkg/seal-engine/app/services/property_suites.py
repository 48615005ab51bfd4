"""
Executable property checks for the auction and the exchange protocol.

Each suite draws seeded random instances, checks one property and returns a
SuiteResult with every counterexample it found, serialized for replay.
"""

import logging
import math
import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.config import ScenarioConfig
from app.models import AuctionInstance, Deviation, TaskSpec, Verdict
from app.services.auction import (
    Candidate,
    critical_payment,
    critical_payment_oracle,
    payoff_under_deviation,
    run_src_auction,
    select_winner,
    truthful_payoff,
)
from app.services.crypto_primitives import DIGEST_SIZE, to_units
from app.services.exchange import AdversaryScript, run_protocol, vehicle_account
from app.services.hashchain import HashChain, claimable_amount, verify_payword
from app.services.scenario import location_seed, random_auction_instance

logger = logging.getLogger(__name__)

GRID = np.linspace(0.5, 1.5, 21)
PAYOFF_TOL = 1e-9
CRITICAL_REL_TOL = 1e-6
# candidate link rates as multiples of the configured rate
LINK_RATE_SPREAD = (0.5, 1.5)


class SuiteResult(BaseModel):
    suite: str
    trials: int
    checks: int = 0
    violations: int = 0
    counterexamples: List[Dict[str, Any]] = Field(default_factory=list)
    details: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, ok: bool, counterexample: Optional[Dict[str, Any]] = None) -> None:
        self.checks += 1
        if not ok:
            self.violations += 1
            if counterexample is not None:
                self.counterexamples.append(counterexample)


def _small_instance(rng: np.random.Generator, config: ScenarioConfig) -> AuctionInstance:
    return random_auction_instance(rng, config, int(rng.integers(5, 16)), int(rng.integers(3, 9)))


def _random_candidates(rng: np.random.Generator, config: ScenarioConfig, count: int) -> List[Candidate]:
    ranges = config.attribute_ranges()
    candidates = []
    for vehicle_id in range(count):
        compute = rng.uniform(*ranges.idle_compute)
        unit_cost = rng.uniform(*ranges.unit_cost)
        link_rate = ranges.link_rate * rng.uniform(*LINK_RATE_SPREAD)
        candidates.append(Candidate(vehicle_id, compute, unit_cost * compute, link_rate))
    return candidates


def _random_task(rng: np.random.Generator, config: ScenarioConfig) -> TaskSpec:
    return TaskSpec(
        id=0,
        size=rng.uniform(*config.task_size_bits),
        urgency=rng.uniform(*config.urgency),
        deadline=rng.uniform(*config.deadline_s),
        intensity=config.intensity_cycles_per_bit,
    )


def truthfulness_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """Deviation grid over (compute, price) around the truthful bid never beats truth-telling."""
    result = SuiteResult(suite="truthfulness", trials=trials)
    rng = np.random.default_rng([seed, 1])
    for trial in range(trials):
        instance = _small_instance(rng, config)
        bidders = [bid for bid in instance.bids if bid.bundle]
        if not bidders:
            continue
        outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
        winners = [bid for bid in bidders if bid.vehicle_id in outcome.tasks_of]
        deviator = winners[int(rng.integers(len(winners)))] if winners else bidders[int(rng.integers(len(bidders)))]
        won = outcome.tasks_of.get(deviator.vehicle_id, [])
        task_id = won[0] if won else deviator.bundle[int(rng.integers(len(deviator.bundle)))]
        baseline = truthful_payoff(instance, deviator.vehicle_id)
        chi, price = deviator.resources[task_id], deviator.prices[task_id]
        for f_chi in GRID:
            for f_price in GRID:
                deviation = Deviation(task_id=task_id, compute=chi * f_chi, price=price * f_price)
                deviated = payoff_under_deviation(instance, deviator.vehicle_id, deviation)
                ok = deviated <= baseline + PAYOFF_TOL
                result.record(ok, None if ok else {
                    "trial": trial,
                    "vehicle_id": deviator.vehicle_id,
                    "deviation": deviation.model_dump(),
                    "truthful_payoff": baseline,
                    "deviated_payoff": deviated,
                    "instance": instance.model_dump(mode="json"),
                })
    return result


def rationality_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """Every truthful winner is paid at least its cost."""
    result = SuiteResult(suite="rationality", trials=trials)
    rng = np.random.default_rng([seed, 2])
    for trial in range(trials):
        instance = _small_instance(rng, config)
        outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
        for vehicle_id, task_ids in outcome.tasks_of.items():
            bid = instance.bid_of(vehicle_id)
            for task_id in task_ids:
                margin = outcome.critical_payment[task_id] - bid.prices[task_id]
                result.record(margin >= -PAYOFF_TOL, None if margin >= -PAYOFF_TOL else {
                    "trial": trial, "vehicle_id": vehicle_id, "task_id": task_id, "margin": margin,
                    "instance": instance.model_dump(mode="json"),
                })
    return result


def _candidate_trial(rng, config):
    task = _random_task(rng, config)
    candidates = _random_candidates(rng, config, int(rng.integers(2, 9)))
    return task, candidates, config.energy_params(), config.cost_weights()


def monotonicity_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """A winner offering more compute for less money keeps winning."""
    result = SuiteResult(suite="monotonicity", trials=trials)
    rng = np.random.default_rng([seed, 3])
    for trial in range(trials):
        task, candidates, energy, weights = _candidate_trial(rng, config)
        winner = select_winner(task, candidates, energy, weights)
        improved = [
            Candidate(c.vehicle_id, c.compute * 1.1, c.price * 0.9, c.link_rate) if c.vehicle_id == winner else c
            for c in candidates
        ]
        ok = select_winner(task, improved, energy, weights) == winner
        result.record(ok, None if ok else {
            "trial": trial, "winner": winner, "task": task.model_dump(),
            "candidates": [c.__dict__ for c in candidates],
        })
    return result


def critical_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """Closed-form critical payments match the bisection supremum of winning prices."""
    result = SuiteResult(suite="critical", trials=trials)
    rng = np.random.default_rng([seed, 4])
    worst = 0.0
    for trial in range(trials):
        task, candidates, energy, weights = _candidate_trial(rng, config)
        winner = select_winner(task, candidates, energy, weights)
        closed = critical_payment(task, winner, candidates, energy, weights, config.reserve)
        oracle = critical_payment_oracle(task, winner, candidates, energy, weights, config.reserve)
        error = abs(closed - oracle) / max(abs(oracle), 1e-12)
        worst = max(worst, error)
        ok = error <= CRITICAL_REL_TOL
        result.record(ok, None if ok else {
            "trial": trial, "winner": winner, "closed_form": closed, "oracle": oracle,
            "task": task.model_dump(), "candidates": [c.__dict__ for c in candidates],
        })
    result.details["max_relative_error"] = worst
    return result


def _scripts_for(instance: AuctionInstance, rng: np.random.Generator) -> List[AdversaryScript]:
    outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
    assigned = sorted(outcome.vehicle_tasks())
    if not assigned:
        return []

    def pick() -> int:
        return int(assigned[int(rng.integers(len(assigned)))])

    longest = max(len(tasks) for tasks in outcome.tasks_of.values())
    return [
        AdversaryScript(),
        AdversaryScript(kind="bidder_aborts", tasks=(pick(),)),
        AdversaryScript(kind="uav_refuses_paywords", after=max(0, min(1, longest - 1))),
        AdversaryScript(kind="wrong_key", tasks=(pick(),)),
        AdversaryScript(kind="replay", tasks=(pick(),)),
    ]


def _misbehaving_party(script: AdversaryScript, instance: AuctionInstance) -> Optional[str]:
    if script.kind == "honest":
        return None
    if script.kind == "uav_refuses_paywords":
        return "uav"
    outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
    return vehicle_account(outcome.winner_of[script.tasks[0]])


def fairness_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """No adversary script produces a paid-but-undelivered or delivered-but-unpaid task."""
    result = SuiteResult(suite="fairness", trials=trials)
    rng = np.random.default_rng([seed, 5])
    settings = config.protocol_settings()
    for trial in range(trials):
        instance = _small_instance(rng, config)
        scripts = _scripts_for(instance, rng)
        if not scripts:
            continue
        round_seed = location_seed(seed, trial)
        honest = run_protocol(instance, scripts[0], settings, seed=round_seed)
        for script in scripts:
            report = honest if script.kind == "honest" else run_protocol(instance, script, settings, seed=round_seed)
            violations = report.verdict_counts().get(Verdict.VIOLATION.value, 0)
            party = _misbehaving_party(script, instance)
            deterred = party is None or report.payoffs[party] < honest.payoffs[party]
            ok = violations == 0 and report.conservation_ok and deterred
            result.record(ok, None if ok else {
                "trial": trial, "script": script.label(), "violations": violations,
                "conservation_ok": report.conservation_ok, "party": party,
                "payoff": report.payoffs.get(party) if party else None,
                "honest_payoff": honest.payoffs.get(party) if party else None,
                "instance": instance.model_dump(mode="json"),
            })
    return result


def _numeric_leaves(value: Any, out: set) -> None:
    if isinstance(value, bool):
        return
    if isinstance(value, (int, float)):
        out.add(value)
    elif isinstance(value, dict):
        for item in value.values():
            _numeric_leaves(item, out)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _numeric_leaves(item, out)


def privacy_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """No bid price or resource amount appears on the ledger, except where it equals a public payment."""
    result = SuiteResult(suite="privacy", trials=trials)
    rng = np.random.default_rng([seed, 6])
    settings = config.protocol_settings()
    for trial in range(trials):
        instance = _small_instance(rng, config)
        report = run_protocol(instance, "honest", settings, seed=location_seed(seed, trial))
        on_ledger: set = set()
        for tx in report.log:
            _numeric_leaves(tx.payload, on_ledger)
        public = set()
        for tx in report.log:
            if tx.type.value == "outcome":
                _numeric_leaves(tx.payload.get("payments", {}), public)
        leaked = []
        for bid in instance.bids:
            for task_id in bid.bundle:
                for secret in (bid.prices[task_id], bid.resources[task_id]):
                    for form in (secret, to_units(secret)):
                        if form in on_ledger and form not in public:
                            leaked.append({"vehicle_id": bid.vehicle_id, "task_id": task_id, "value": form})
        result.record(not leaked, None if not leaked else {"trial": trial, "leaked": leaked})
    return result


def complexity_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """Auction time grows about linearly in bidders; a full round stays interactive."""
    result = SuiteResult(suite="complexity", trials=trials)
    rng = np.random.default_rng([seed, 7])

    def auction_time(vehicles: int) -> float:
        instance = random_auction_instance(rng, config, 100, vehicles)
        started = time.perf_counter()
        run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
        return time.perf_counter() - started

    small = float(np.mean([auction_time(50) for _ in range(trials)]))
    large = float(np.mean([auction_time(100) for _ in range(trials)]))
    ratio = large / small if small > 0 else math.inf
    result.details.update({"auction_s_i50": small, "auction_s_i100": large, "ratio": ratio})
    result.record(ratio <= 2.6, None if ratio <= 2.6 else {"ratio": ratio})

    started = time.perf_counter()
    instance = random_auction_instance(rng, config, 100, 50)
    run_protocol(instance, "honest", config.protocol_settings(), seed=seed)
    pipeline = time.perf_counter() - started
    result.details["pipeline_s"] = pipeline
    result.record(pipeline < 2.0, None if pipeline < 2.0 else {"pipeline_s": pipeline})
    return result


def hashchain_suite(trials: int, seed: int, config: ScenarioConfig) -> SuiteResult:
    """Claims pay exactly the authorized prefix minus failures; forged paywords never verify."""
    result = SuiteResult(suite="hashchain", trials=trials)
    rng = np.random.default_rng([seed, 8])
    forgeries = 0
    for trial in range(trials):
        size = int(rng.integers(1, 51))
        payments = [int(p) for p in rng.integers(0, 10 ** 8, size=size)]
        chain = HashChain.build(payments, rng.bytes(DIGEST_SIZE))
        count = int(rng.integers(1, size + 1))
        failed = {int(z) for z in np.flatnonzero(rng.random(size) < 0.3) + 1}
        expected = sum(payments[z - 1] for z in range(1, count + 1) if z not in failed)
        ok = verify_payword(chain.root, chain.payword(count), count, payments) and (
            claimable_amount(payments, count, failed) == expected
        )
        result.record(ok, None if ok else {"trial": trial, "payments": payments, "count": count,
                                           "failed": sorted(failed)})
        for _ in range(100):
            forged = rng.bytes(DIGEST_SIZE)
            forgeries += 1
            accepted = verify_payword(chain.root, forged, count, payments)
            result.record(not accepted, None if not accepted else {"trial": trial, "forged": forged.hex()})
    result.details["forgeries"] = forgeries
    return result


SUITES: Dict[str, Callable[[int, int, ScenarioConfig], SuiteResult]] = {
    "truthfulness": truthfulness_suite,
    "rationality": rationality_suite,
    "monotonicity": monotonicity_suite,
    "critical": critical_suite,
    "fairness": fairness_suite,
    "privacy": privacy_suite,
    "complexity": complexity_suite,
    "hashchain": hashchain_suite,
}


def run_suite(name: str, trials: int, seed: int, config: Optional[ScenarioConfig] = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    config = config or ScenarioConfig(run_protocol=False)
    result = SUITES[name](trials, seed, config)
    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, f"Suite {name}: {result.checks} checks, {result.violations} violations")
    return result
