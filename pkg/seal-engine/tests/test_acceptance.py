"""
Statistical trend checks over full sweeps. Run with `pytest -m slow`.
"""

import pytest

from app.models import Scheme
from app.services.experiments import axis_values, run_sweep
from tests.factories import scenario_config

SEEDS = list(range(5))
WIDE_SEEDS = list(range(20))


def _mean_cost(frame):
    costs = frame[frame["metric"] == "uav_cost"]
    return costs.groupby("axis_value")["value"].mean().sort_index()


def _mean_energy(frame):
    energy = frame[frame["metric"] == "energy_j"]
    return energy.groupby("scheme")["value"].mean()


@pytest.mark.slow
class TestTrends:

    def test_cost_falls_with_density(self):
        """More vehicles under the UAV means cheaper offloading."""
        config = scenario_config(task_count=200)
        values = axis_values("density", 10, 100, 10)
        means = _mean_cost(run_sweep(config, "density", values, [Scheme.SEAL], SEEDS, locations=4))
        inversions = [
            (a, b) for a, b in zip(means.values, means.values[1:])
            if b > a
        ]
        assert len(inversions) <= 1
        assert all(b <= a * 1.02 for a, b in inversions)
        assert means.iloc[-1] < means.iloc[0]

    def test_cost_grows_with_tasks(self):
        """Extra tasks at a fixed density never make the segment cheaper."""
        config = scenario_config(density_per_km=50.0)
        means = _mean_cost(run_sweep(config, "tasks", [190, 205], [Scheme.SEAL], SEEDS, locations=4))
        assert means.loc[205] >= means.loc[190]


@pytest.mark.slow
class TestBaselineEnergy:

    def test_long_flights_favour_auction_speed(self):
        """Over 25 locations SEAL spends no more UAV energy than DAA or PAA."""
        config = scenario_config(tasks_per_location=(100, 120))
        schemes = [Scheme.SEAL, Scheme.DAA, Scheme.PAA]
        energy = _mean_energy(run_sweep(config, "locations", [25], schemes, WIDE_SEEDS))
        assert energy[Scheme.SEAL.value] <= energy[Scheme.DAA.value]
        assert energy[Scheme.SEAL.value] <= energy[Scheme.PAA.value]

    def test_heavy_locations_favour_auction(self):
        """With 300 tasks per location SEAL's UAV energy is at most every vehicle baseline's."""
        schemes = [Scheme.SEAL, Scheme.EAA, Scheme.DAA, Scheme.PAA]
        energy = _mean_energy(run_sweep(scenario_config(), "tasks", [300], schemes, WIDE_SEEDS, locations=4))
        for scheme in (Scheme.EAA, Scheme.DAA, Scheme.PAA):
            assert energy[Scheme.SEAL.value] <= energy[scheme.value]
