"""
Tests for the simulated enclave: attestation, sealed bids, deposit screening
and the published outcome
"""

import numpy as np
import pytest

from app.errors import AttestationError, SealedDataError
from app.models import CLOUD
from app.services.crypto_primitives import to_units
from app.services.enclave import Enclave, expected_measurement
from tests.factories import make_instance

AGREED = {"reserve": 80.0, "deposit_multiplier": 1.5}


class TestEnclave:

    def setup_method(self):
        """Enclave for the reference instance; both bidders attested."""
        self.rng = np.random.default_rng(11)
        self.instance = make_instance()
        self.enclave = Enclave(self.rng, AGREED)
        self.parties = ["uav", "vehicle-0", "vehicle-1"]
        for party in self.parties:
            self.enclave.attest(party, expected_measurement(AGREED))
        self.sealed = {bid.vehicle_id: self.enclave.seal(bid) for bid in self.instance.bids}

    def _execute(self, deposits):
        return self.enclave.execute(
            self.parties, self.sealed, deposits, self.instance.tasks, self.instance.env,
            self.instance.reserve, 1.5,
        )

    def test_measurement_binds_configuration(self):
        """A different agreed configuration changes the measurement."""
        assert expected_measurement(AGREED) != expected_measurement({**AGREED, "reserve": 81.0})
        assert expected_measurement(AGREED, b"other program") != expected_measurement(AGREED)

    def test_attestation_mismatch(self):
        """Attesting a different measurement raises."""
        with pytest.raises(AttestationError):
            self.enclave.attest("vehicle-2", expected_measurement({"reserve": 1.0}))
        assert not self.enclave.is_attested("vehicle-2")

    def test_execution_requires_every_attestation(self):
        """A party that has not attested blocks execution."""
        with pytest.raises(AttestationError):
            self.enclave.execute(
                self.parties + ["vehicle-2"], self.sealed, {0: 10**9, 1: 10**9},
                self.instance.tasks, self.instance.env, self.instance.reserve, 1.5,
            )

    def test_sealed_bid_round_trip(self):
        """The enclave recovers the exact bid."""
        assert self.enclave.unseal(self.sealed[0]) == self.instance.bid_of(0)

    def test_foreign_ciphertext(self):
        """Data not sealed to this enclave cannot be opened."""
        other = Enclave(np.random.default_rng(12), AGREED)
        with pytest.raises(SealedDataError):
            self.enclave.unseal(other.seal(self.instance.bid_of(0)))

    def test_insufficient_deposit_excludes_bidder(self):
        """A bidder whose deposit does not cover its bids is left out."""
        result = self._execute({0: 0, 1: 10**9})
        assert result.excluded == [0]
        assert result.admitted == [1]
        assert set(result.outcome.winner_of.values()) == {1}

    def test_covered_deposits_admit_all(self):
        """Deposits at the required level admit the bidder."""
        required = {
            bid.vehicle_id: to_units(max(bid.prices.values()) * 1.5) for bid in self.instance.bids
        }
        result = self._execute(required)
        assert result.admitted == [0, 1]
        assert result.excluded == []

    def test_outcome_payload_is_public_view(self):
        """Only assignees and integer payments leave the enclave."""
        result = self._execute({0: 10**9, 1: 10**9})
        payload = self.enclave.outcome_payload(result.outcome, {0: "vehicle-0", 1: "vehicle-1"})
        assert set(payload) == {"winner_of", "payments"}
        assert payload["winner_of"] == {"0": "vehicle-0", "1": "vehicle-0", "2": "vehicle-0"}
        assert all(isinstance(units, int) for units in payload["payments"].values())

    def test_cloud_tasks_stay_named(self):
        """Fallback tasks are published as CLOUD."""
        result = self._execute({0: 0, 1: 0})
        payload = self.enclave.outcome_payload(result.outcome, {})
        assert set(payload["winner_of"].values()) == {CLOUD}
        assert payload["payments"] == {}
