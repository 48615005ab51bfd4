"""
Tests for the multi-round reverse auction: bids, candidates, winner selection
and critical payments
"""

import pytest
from pydantic import ValidationError

from app.errors import NoCandidateError, ParameterError
from app.models import CLOUD, AuctionEnvironment, CostWeights, Deviation, EnergyParams
from app.services.auction import (
    Candidate,
    build_candidate_set,
    build_feasible_task_set,
    critical_payment,
    critical_payment_oracle,
    marginal_cost_factor,
    payoff_under_deviation,
    required_compute,
    run_src_auction,
    select_winner,
    sort_by_urgency,
    truthful_bid,
    truthful_payoff,
    virtual_price,
)
from tests.factories import make_instance, make_task, make_vehicle


class TestBids:

    def test_urgency_order_breaks_ties_by_id(self):
        """Most urgent first; equal urgency keeps id order."""
        tasks = [make_task(2, urgency=0.5), make_task(0, urgency=0.9), make_task(1, urgency=0.5)]
        assert [t.id for t in sort_by_urgency(tasks)] == [0, 1, 2]

    def test_required_compute(self):
        """Supply that finishes exactly at the deadline."""
        task = make_task(size=1e6, deadline=2.0, intensity=50.0)
        # upload 1 s leaves 1 s for 5e7 cycles
        assert required_compute(task, 1e6, 10.0) == pytest.approx(5e7)

    def test_required_compute_when_upload_too_slow(self):
        """No supply helps if the upload alone misses the window."""
        task = make_task(size=6e6, deadline=0.5)
        assert required_compute(task, 6e6, 10.0) is None

    def test_truthful_bid_prices_true_cost(self):
        """Each bundled task is priced at unit cost times supplied compute."""
        vehicle = make_vehicle(unit_cost=3e-9)
        tasks = sort_by_urgency([make_task(i, urgency=0.5 + 0.1 * i) for i in range(3)])
        bid = truthful_bid(vehicle, tasks, 25.0)
        assert bid.bundle == (2, 1, 0)
        for task_id in bid.bundle:
            assert bid.prices[task_id] == pytest.approx(3e-9 * bid.resources[task_id])

    def test_supply_margin_scales_resources(self):
        """Supply is the margin times the minimum feasible compute."""
        vehicle = make_vehicle()
        task = make_task()
        bid = truthful_bid(vehicle, [task], 25.0, supply_margin=2.0)
        assert bid.resources[0] == pytest.approx(2.0 * required_compute(task, vehicle.link_rate, 25.0))

    def test_bundle_respects_idle_compute(self):
        """Tasks that would exceed the idle compute are skipped."""
        vehicle = make_vehicle(idle_compute=1e8)
        tasks = [make_task(i) for i in range(3)]
        bundle = build_feasible_task_set(vehicle, tasks, 25.0, {0: 6e7, 1: 6e7, 2: 3e7})
        assert bundle == (0, 2)


class TestWinnerSelection:

    def setup_method(self):
        """One task and reference energy/weights."""
        self.task = make_task()
        self.energy = EnergyParams()
        self.weights = CostWeights()

    def test_empty_candidate_set(self):
        """Selecting from nothing is an error."""
        with pytest.raises(NoCandidateError):
            select_winner(self.task, [], self.energy, self.weights)

    def test_ties_go_to_lowest_id(self):
        """Identical offers pick the smaller vehicle id."""
        candidates = [Candidate(5, 1e8, 1.0, 6e6), Candidate(2, 1e8, 1.0, 6e6)]
        assert select_winner(self.task, candidates, self.energy, self.weights) == 2

    def test_cheaper_offer_wins(self):
        """Lower price at equal supply lowers the marginal cost factor."""
        candidates = [Candidate(0, 1e8, 2.0, 6e6), Candidate(1, 1e8, 1.0, 6e6)]
        assert select_winner(self.task, candidates, self.energy, self.weights) == 1

    def test_marginal_cost_factor_rejects_zero_compute(self):
        """Compute must be positive."""
        with pytest.raises(ParameterError):
            marginal_cost_factor(self.task, 0.0, 1.0, 6e6, self.energy, self.weights)

    def test_candidate_set_filters(self):
        """Bids above the reserve or beyond residual capacity are not candidates."""
        instance = make_instance(task_count=1, vehicle_count=3)
        task = instance.tasks[0]
        residual = {0: 0.0, 1: 2e9, 2: 2e9}
        prices = sorted(bid.prices[0] for bid in instance.bids)
        reserve = prices[1]
        candidates = build_candidate_set(task, instance.bids, residual, instance.env, reserve)
        assert [c.vehicle_id for c in candidates] == [1]


class TestCriticalPayment:

    def setup_method(self):
        """Reference energy/weights and a task."""
        self.task = make_task(size=3e6)
        self.energy = EnergyParams()
        self.weights = CostWeights()

    def test_singleton_is_paid_the_reserve(self):
        """Without competition the winner receives the reserve."""
        candidates = [Candidate(0, 1e8, 1.0, 6e6)]
        assert critical_payment(self.task, 0, candidates, self.energy, self.weights, 80.0) == pytest.approx(80.0)

    def test_equal_supply_pays_runner_up_price(self):
        """With identical supply the critical value is the runner-up's price."""
        candidates = [Candidate(0, 1e8, 1.0, 6e6), Candidate(1, 1e8, 3.0, 6e6)]
        assert critical_payment(self.task, 0, candidates, self.energy, self.weights, 80.0) == pytest.approx(3.0)

    def test_payment_capped_by_reserve(self):
        """The reserve caps the critical value."""
        candidates = [Candidate(0, 1e8, 1.0, 6e6), Candidate(1, 1e8, 50.0, 6e6)]
        assert critical_payment(self.task, 0, candidates, self.energy, self.weights, 10.0) == pytest.approx(10.0)

    def test_payment_never_below_bid(self):
        """Individual rationality: payment covers the winner's price."""
        candidates = [Candidate(0, 5e8, 2.0, 6e6), Candidate(1, 1e8, 1.0, 6e6)]
        winner = select_winner(self.task, candidates, self.energy, self.weights)
        payment = critical_payment(self.task, winner, candidates, self.energy, self.weights, 80.0)
        own = next(c for c in candidates if c.vehicle_id == winner)
        assert payment >= own.price

    def test_closed_form_matches_bisection(self):
        """The closed form is the supremum of winning prices."""
        candidates = [
            Candidate(0, 8e8, 2.0, 6e6),
            Candidate(1, 5e8, 1.5, 6e6),
            Candidate(2, 1.2e9, 6.0, 6e6),
        ]
        winner = select_winner(self.task, candidates, self.energy, self.weights)
        closed = critical_payment(self.task, winner, candidates, self.energy, self.weights, 80.0)
        oracle = critical_payment_oracle(self.task, winner, candidates, self.energy, self.weights, 80.0)
        assert closed == pytest.approx(oracle, rel=1e-6)

    def test_full_energy_weight_rejected_at_construction(self):
        """omega = 1 cannot reach the pricing rule."""
        with pytest.raises(ValidationError):
            CostWeights(omega=1.0)

    def test_virtual_price_with_equal_supply(self):
        """Identical compute and link rate leave only the critical price."""
        winner = Candidate(0, 1e9, 1.0, 6e6)
        critical = Candidate(1, 1e9, 3.5, 6e6)
        assert virtual_price(self.task, winner, critical, self.energy, self.weights) == pytest.approx(3.5)

    def test_direct_auction_near_full_energy_weight(self):
        """A direct auction call with omega just below 1 still prices every task."""
        instance = make_instance()
        env = instance.env.model_copy(update={"weights": CostWeights(omega=0.99)})
        outcome = run_src_auction(instance.tasks, instance.bids, env, instance.reserve)
        assert set(outcome.critical_payment) == {0, 1, 2}
        assert all(payment >= 0.0 for payment in outcome.critical_payment.values())

    def test_winner_must_be_candidate(self):
        """Pricing a non-candidate is rejected."""
        candidates = [Candidate(0, 1e8, 1.0, 6e6)]
        with pytest.raises(ParameterError):
            critical_payment(self.task, 7, candidates, self.energy, self.weights, 80.0)


class TestRunAuction:

    def setup_method(self):
        """Three tasks, two bidders differing only in unit cost."""
        self.instance = make_instance()
        self.outcome = run_src_auction(
            self.instance.tasks, self.instance.bids, self.instance.env, self.instance.reserve
        )

    def test_cheapest_vehicle_wins_every_task(self):
        """Equal supply and lower prices win all rounds."""
        assert self.outcome.winner_of == {0: 0, 1: 0, 2: 0}
        assert self.outcome.winners == [0]
        assert self.outcome.tasks_of[0] == [0, 1, 2]

    def test_payments_are_runner_up_prices(self):
        """Each payment equals vehicle 1's price for the task."""
        runner_up = self.instance.bid_of(1)
        for task_id, payment in self.outcome.critical_payment.items():
            assert payment == pytest.approx(runner_up.prices[task_id])
            assert self.outcome.critical_bidder[task_id] == 1

    def test_public_view_hides_ranking(self):
        """Only allocation and payments are published."""
        view = self.outcome.public_view().model_dump()
        assert set(view) == {"winner_of", "critical_payment"}

    def test_no_bids_go_to_cloud(self):
        """Tasks without candidates fall back to the cloud."""
        outcome = run_src_auction(self.instance.tasks, [], AuctionEnvironment(), self.instance.reserve)
        assert outcome.winner_of == {0: CLOUD, 1: CLOUD, 2: CLOUD}
        assert outcome.critical_payment == {}

    def test_deterministic(self):
        """Same inputs give the same outcome."""
        again = run_src_auction(self.instance.tasks, self.instance.bids, self.instance.env, self.instance.reserve)
        assert again.model_dump() == self.outcome.model_dump()


class TestDeviations:

    def setup_method(self):
        """Two bidders; vehicle 0 wins everything under truthful bidding."""
        self.instance = make_instance()

    def test_truthful_payoff_non_negative(self):
        """Truthful winners never lose money."""
        assert truthful_payoff(self.instance, 0) >= 0.0
        assert truthful_payoff(self.instance, 1) == 0.0

    def test_overbidding_price_does_not_help(self):
        """Asking more than the critical value loses the task."""
        bid = self.instance.bid_of(0)
        baseline = truthful_payoff(self.instance, 0)
        deviation = Deviation(task_id=0, compute=bid.resources[0], price=bid.prices[0] * 10)
        assert payoff_under_deviation(self.instance, 0, deviation) <= baseline + 1e-9

    def test_overreporting_compute_forfeits_payment(self):
        """Promising more compute than available costs the promised supply."""
        bid = self.instance.bid_of(0)
        baseline = truthful_payoff(self.instance, 0)
        deviation = Deviation(task_id=0, compute=bid.resources[0] * 1.5, price=bid.prices[0])
        assert payoff_under_deviation(self.instance, 0, deviation) < baseline

    def test_deviation_outside_bundle(self):
        """Only bundled tasks can be deviated on."""
        with pytest.raises(ParameterError):
            payoff_under_deviation(self.instance, 0, Deviation(task_id=99, compute=1.0, price=1.0))
