"""
Tests for timing, energy, cost and the per-location objective
"""

import math

import numpy as np
import pytest

from app.errors import ParameterError
from app.models import CLOUD, AuctionOutcome, CostWeights, EnergyParams
from app.services.auction import run_src_auction
from app.services.cost import (
    cloud_price,
    energy_optimal_speed,
    enumerate_optimal_allocation,
    feasible,
    flight_energy,
    flight_power,
    objective_value,
    segment_energy,
    segment_energy_breakdown,
    task_completion_time,
    transmission_time,
    truthful_price,
    uav_total_cost,
    vehicle_payoff,
)
from tests.factories import make_instance, make_task, random_instance


class TestTiming:

    def test_transmission_time(self):
        """Upload time is size over rate."""
        assert transmission_time(make_task(size=6e6), 6e6) == pytest.approx(1.0)

    def test_completion_time(self):
        """Upload plus computation."""
        task = make_task(size=1e6, intensity=50.0)
        assert task_completion_time(task, 1e8, 1e6) == pytest.approx(1.5)

    def test_completion_time_rejects_zero_compute(self):
        """Zero compute has no completion time."""
        with pytest.raises(ParameterError):
            task_completion_time(make_task(), 0.0, 6e6)

    def test_feasible_uses_deadline_and_dwell(self):
        """The tighter of deadline and dwell binds."""
        task = make_task(deadline=2.0)
        assert feasible(task, 1.5, 10.0)
        assert not feasible(task, 1.5, 1.0)
        assert not feasible(task, 2.5, 10.0)


class TestEnergy:

    def setup_method(self):
        """Constant-power reference parameters."""
        self.params = EnergyParams()

    def test_constant_flight_energy(self):
        """P x L / V with constant propulsion power."""
        assert flight_energy(self.params) == pytest.approx(150.0 * 500.0 / 20.0)

    def test_power_curve(self):
        """P(V) = c1 V^3 + c2 / V when a curve is configured."""
        curved = self.params.model_copy(update={"fly_power_curve": (1.0, 10000.0)})
        assert flight_power(curved, 10.0) == pytest.approx(1000.0 + 1000.0)

    def test_optimal_speed_constant_power(self):
        """Constant power favours the fastest speed."""
        assert energy_optimal_speed(self.params) == pytest.approx(20.0)

    def test_optimal_speed_curve(self):
        """Closed-form optimum (c2/c1)^(1/4), clipped to the speed bounds."""
        curved = self.params.model_copy(update={"fly_power_curve": (1.0, 10000.0)})
        assert energy_optimal_speed(curved) == pytest.approx(10.0)
        steep = self.params.model_copy(update={"fly_power_curve": (1.0, 1e9)})
        assert energy_optimal_speed(steep) == pytest.approx(20.0)

    def test_segment_energy_split(self):
        """Flight, hover and transmit add up to the segment energy."""
        task = make_task(size=1e6, intensity=50.0)
        assignments = [(task, 1e8, 1e6)]
        breakdown = segment_energy_breakdown(self.params, assignments)
        assert breakdown.hover == pytest.approx(500.0 * 1.5)
        assert breakdown.transmit == pytest.approx(0.2 * 1.0)
        assert segment_energy(self.params, assignments) == pytest.approx(breakdown.total)

    def test_empty_segment_is_flight_only(self):
        """No tasks leaves only the flight energy."""
        assert segment_energy(self.params, []) == pytest.approx(flight_energy(self.params))


class TestCost:

    def test_uav_total_cost(self):
        """omega x energy + (1 - omega) x lambda x payments."""
        weights = CostWeights(omega=0.5, lambda_p=40.0)
        assert uav_total_cost(100.0, [1.0, 2.0], weights) == pytest.approx(110.0)

    def test_omega_extremes(self):
        """omega near 1 all but ignores payments; omega = 0 ignores energy."""
        assert uav_total_cost(100.0, [5.0], CostWeights(omega=0.999, lambda_p=1.0)) == pytest.approx(99.905)
        assert uav_total_cost(100.0, [5.0], CostWeights(omega=0.0, lambda_p=2.0)) == pytest.approx(10.0)

    def test_negative_payment_rejected(self):
        """Payments are non-negative."""
        with pytest.raises(ParameterError):
            uav_total_cost(1.0, [-1.0], CostWeights())

    def test_truthful_price(self):
        """Linear in supplied compute plus the fixed cost."""
        assert truthful_price(2e-9, 1e9, 0.5) == pytest.approx(2.5)

    def test_cloud_price(self):
        """Server price is unit cost times capacity."""
        assert cloud_price(8e-9, 1e10) == pytest.approx(80.0)
        with pytest.raises(ParameterError):
            cloud_price(8e-9, 0.0)

    def test_vehicle_payoff(self):
        """Losers get zero; winners get payment minus cost."""
        assert vehicle_payoff(5.0, 1e9, 2e-9, 0.0, won=False) == 0.0
        assert vehicle_payoff(5.0, 1e9, 2e-9, 0.0, won=True) == pytest.approx(3.0)


class TestObjective:

    def setup_method(self):
        """Three tasks, two bidders; vehicle 0 wins everything."""
        self.instance = make_instance()
        self.outcome = run_src_auction(
            self.instance.tasks, self.instance.bids, self.instance.env, self.instance.reserve
        )

    def _evaluate(self, winner_of, payments=None):
        allocation = AuctionOutcome(winner_of=winner_of)
        return objective_value(
            allocation, self.instance.tasks, self.instance.bids, self.instance.env,
            payments=payments if payments is not None else self.outcome.critical_payment,
        )

    def test_auction_outcome_is_feasible(self):
        """The auction's own allocation satisfies every constraint."""
        result = objective_value(self.outcome, self.instance.tasks, self.instance.bids, self.instance.env)
        assert result.feasible
        assert math.isfinite(result.value)

    def test_unassigned_task(self):
        """Every task needs exactly one assignee."""
        result = self._evaluate({0: 0, 1: 0})
        assert not result.feasible
        assert result.violated == "single_assignment"
        assert result.task_id == 2

    def test_unknown_bidder(self):
        """Assignments must come from a submitted bid."""
        result = self._evaluate({0: 0, 1: 0, 2: 99})
        assert result.violated == "bundle"

    def test_payment_below_bid(self):
        """Paying less than the bid breaks individual rationality."""
        payments = {t: 0.0 for t in range(3)}
        result = self._evaluate({0: 0, 1: 0, 2: 0}, payments)
        assert result.violated == "rationality"

    def test_capacity(self):
        """Declared capacity bounds the summed supply of a vehicle."""
        env = self.instance.env.model_copy(update={"capacity": {0: 1.0, 1: 1.0}})
        result = objective_value(self.outcome, self.instance.tasks, self.instance.bids, env)
        assert result.violated == "capacity"

    def test_deadline(self):
        """A completion past the dwell time is infeasible."""
        env = self.instance.env.model_copy(update={"dwell": {0: 0.01, 1: 0.01}})
        result = objective_value(self.outcome, self.instance.tasks, self.instance.bids, env)
        assert result.violated == "deadline"

    def test_cloud_assignment_is_feasible(self):
        """Fallback tasks are always feasible and charged the server price."""
        result = self._evaluate({t: CLOUD for t in range(3)}, {})
        assert result.feasible

    def test_enumeration_lower_bounds_the_auction(self):
        """At bid prices no allocation beats the exhaustive optimum."""
        best, best_map = enumerate_optimal_allocation(
            self.instance.tasks, self.instance.bids, self.instance.env, self.instance.reserve
        )
        bid_prices = {t: self.instance.bid_of(w).prices[t] for t, w in self.outcome.winner_of.items() if w != CLOUD}
        auction_value = self._evaluate(self.outcome.winner_of, bid_prices).value
        assert best.feasible
        assert set(best_map) == {0, 1, 2}
        assert best.value <= auction_value + 1e-9

    def test_random_instances_never_beat_exhaustive_optimum(self):
        """On random small instances the auction's allocation is never below the enumerated minimum."""
        rng = np.random.default_rng(2024)
        for _ in range(15):
            instance = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(2, 7)))
            outcome = run_src_auction(instance.tasks, instance.bids, instance.env, instance.reserve)
            bid_prices = {t: instance.bid_of(w).prices[t] for t, w in outcome.winner_of.items() if w != CLOUD}
            auction = objective_value(outcome, instance.tasks, instance.bids, instance.env, payments=bid_prices)
            best, best_map = enumerate_optimal_allocation(instance.tasks, instance.bids, instance.env, instance.reserve)
            assert auction.feasible
            assert best.feasible
            assert set(best_map) == {task.id for task in instance.tasks}
            assert best.value <= auction.value * (1 + 1e-12)
