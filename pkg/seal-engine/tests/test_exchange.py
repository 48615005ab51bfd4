"""
Tests for the commit-then-claim exchange: adversary scripts, off-ledger
messages and full protocol rounds
"""

import numpy as np
import pytest

from app.errors import ParameterError
from app.models import ProtocolSettings, TxType, Verdict
from app.services.crypto_primitives import BoxKeyPair, SigningIdentity
from app.services.exchange import (
    AdversaryScript,
    WinnerCommit,
    accept_payword,
    deliver_result,
    open_result,
    reveal_payword,
    run_protocol,
    uav_round_cost,
    verify_result,
    vehicle_account,
)
from app.services.hashchain import HashChain
from app.services.ledger import Account
from app.services.auction import run_src_auction
from tests.factories import make_instance


class TestAdversaryScript:

    def test_parse_honest(self):
        """The default script."""
        script = AdversaryScript.parse("honest")
        assert script.kind == "honest"
        assert script.label() == "honest"

    def test_parse_task_lists(self):
        """Task-targeted scripts carry their ids."""
        script = AdversaryScript.parse("bidder_aborts:3,7")
        assert script.tasks == (3, 7)
        assert script.targets("bidder_aborts", 7)
        assert not script.targets("wrong_key", 7)
        assert script.label() == "bidder_aborts:3,7"

    def test_parse_payword_refusal(self):
        """uav_refuses_paywords carries a chain position."""
        script = AdversaryScript.parse("uav_refuses_paywords:2")
        assert script.after == 2

    @pytest.mark.parametrize("text", ["bogus", "wrong_key:", "replay:1,2", "uav_refuses_paywords:x"])
    def test_invalid_scripts(self, text):
        """Malformed scripts raise ParameterError."""
        with pytest.raises(ParameterError):
            AdversaryScript.parse(text)


class TestOffLedgerMessages:

    def setup_method(self):
        """UAV keys and a two-position commitment."""
        self.rng = np.random.default_rng(5)
        self.uav_box = BoxKeyPair.generate(self.rng)
        identity = SigningIdentity.generate(self.rng)
        self.uav = Account(id="uav", identity=identity, wallet=0, role="uav")
        self.commit = WinnerCommit(
            account_id="vehicle-0", vehicle_id=0, chain=HashChain.build([5, 6], self.rng.bytes(32)),
            tasks=[1, 2], deadlines=[10.0, 11.0], nonce_base=40,
        )

    def test_result_opens_with_released_key(self):
        """The UAV decrypts a delivered result once it holds the key."""
        delivered = deliver_result(self.rng, self.uav_box.public_key, "vehicle-0", 1, 41, b"result")
        assert open_result(self.uav_box, delivered.message, delivered.key) == b"result"

    def test_verify_result(self):
        """Nonce, published hash and proof must all match."""
        delivered = deliver_result(self.rng, self.uav_box.public_key, "vehicle-0", 1, 41, b"result")
        message = delivered.message
        assert verify_result(message, 41, (message.digest, 41))
        assert not verify_result(message, 42, (message.digest, 41))
        assert not verify_result(message, 41, None)
        assert not verify_result(message, 41, (b"\x00" * 32, 41))

    def test_payword_accepted_only_with_uav_signature(self):
        """Winners check the signature and the fold to the root."""
        signed = reveal_payword(self.uav, self.commit, 2)
        assert accept_payword(signed, self.uav.identity.public_hex, self.commit)
        stranger = SigningIdentity.generate(self.rng)
        assert not accept_payword(signed, stranger.public_hex, self.commit)

    def test_commit_positions(self):
        """Chain positions are 1-based in deadline order."""
        assert self.commit.index_of(2) == 2
        assert self.commit.payload()["payments"] == [5, 6]


class TestProtocolRound:

    def setup_method(self):
        """Reference instance; vehicle 0 wins all three tasks."""
        self.instance = make_instance()
        self.settings = ProtocolSettings()
        self.honest = run_protocol(self.instance, "honest", self.settings, seed=1)

    def _counts(self, report):
        return report.verdict_counts()

    def test_honest_round_delivers_and_pays_everything(self):
        """Every task is delivered and paid; money is conserved."""
        assert self._counts(self.honest) == {Verdict.DELIVERED_AND_PAID.value: 3}
        assert not self.honest.aborted
        assert self.honest.conservation_ok
        assert self.honest.escrow == 0
        assert self.honest.penalty_pool == 0
        assert self.honest.failed_tasks == {}
        assert self.honest.tx_counts[TxType.CLAIM.value] == 1

    def test_honest_round_transaction_counts(self):
        """One outcome and one batched commit per round; per-task and per-party txs otherwise."""
        assert self.honest.tx_counts == {
            TxType.DEPOSIT.value: 3,
            TxType.OUTCOME.value: 1,
            TxType.COMMIT.value: 1,
            TxType.PUBLISH_HASH.value: 3,
            TxType.KEY.value: 3,
            TxType.CLAIM.value: 1,
            TxType.REFUND.value: 3,
        }

    def test_commit_batched_with_more_bidders(self):
        """Extra bidders add deposits and refunds, never extra commits."""
        report = run_protocol(make_instance(vehicle_count=3), "honest", self.settings, seed=1)
        assert report.tx_counts[TxType.OUTCOME.value] == 1
        assert report.tx_counts[TxType.COMMIT.value] == 1
        assert report.tx_counts[TxType.DEPOSIT.value] == 4
        assert report.tx_counts[TxType.REFUND.value] == 4
        assert report.tx_counts[TxType.CLAIM.value] == 1

    def test_honest_vehicle_profits(self):
        """The winner's wallet delta covers its computation cost."""
        assert self.honest.payoffs["vehicle-0"] > 0.0
        assert self.honest.payoffs["vehicle-1"] == pytest.approx(0.0)

    def test_report_statistics(self):
        """Latency and ledger size are reported."""
        assert self.honest.consensus_latency.count == len(self.honest.log)
        assert 0.3 <= self.honest.consensus_latency.mean <= 0.81
        assert self.honest.ledger_bytes["total"] > self.honest.ledger_bytes["commit"] > 0

    def test_deterministic_under_seed(self):
        """The same seed replays the same ledger."""
        again = run_protocol(self.instance, "honest", self.settings, seed=1)
        assert again.model_dump_json() == self.honest.model_dump_json()

    def test_bidder_abort(self):
        """An aborted task is neither delivered nor paid, and the bidder is slashed."""
        report = run_protocol(self.instance, "bidder_aborts:1", self.settings, seed=1)
        by_task = {v.task_id: v for v in report.verdicts}
        assert by_task[1].verdict == Verdict.NEITHER_WITH_PENALTY
        assert by_task[1].fault == "bidder"
        assert by_task[0].verdict == Verdict.DELIVERED_AND_PAID
        assert by_task[2].verdict == Verdict.DELIVERED_AND_PAID
        assert report.penalty_pool > 0
        assert report.conservation_ok
        assert report.payoffs["vehicle-0"] < self.honest.payoffs["vehicle-0"]

    def test_wrong_key(self):
        """A wrong key fails the task with a penalty."""
        report = run_protocol(self.instance, "wrong_key:0", self.settings, seed=1)
        by_task = {v.task_id: v for v in report.verdicts}
        assert by_task[0].verdict == Verdict.NEITHER_WITH_PENALTY
        assert by_task[0].fault == "bidder"
        assert report.failed_tasks == {"vehicle-0": [0]}
        assert Verdict.VIOLATION.value not in report.verdict_counts()
        assert report.conservation_ok

    def test_replay_rejected(self):
        """A stale nonce is rejected on the ledger and reported by the UAV."""
        report = run_protocol(self.instance, "replay:2", self.settings, seed=1)
        reasons = [tx.reason for tx in report.log if tx.type == TxType.PUBLISH_HASH]
        assert "stale_nonce" in reasons
        assert any(tx.type == TxType.MISBEHAVIOR for tx in report.log)
        by_task = {v.task_id: v for v in report.verdicts}
        assert by_task[2].verdict == Verdict.NEITHER_WITH_PENALTY
        assert by_task[2].fault == "bidder"

    def test_uav_refuses_paywords(self):
        """Without paywords no key is released and nobody is paid; the vehicle is not slashed."""
        report = run_protocol(self.instance, "uav_refuses_paywords:0", self.settings, seed=1)
        assert report.verdict_counts() == {Verdict.NEITHER_WITH_PENALTY.value: 3}
        assert all(v.fault == "uav" for v in report.verdicts)
        assert report.penalty_pool == 0
        assert report.conservation_ok
        assert report.payoffs["uav"] < self.honest.payoffs["uav"]

    def test_partial_payword_refusal(self):
        """Positions up to the refusal point still settle."""
        report = run_protocol(self.instance, "uav_refuses_paywords:2", self.settings, seed=1)
        indices = {v.index: v.verdict for v in report.verdicts}
        assert indices[1] == Verdict.DELIVERED_AND_PAID
        assert indices[2] == Verdict.DELIVERED_AND_PAID
        assert indices[3] == Verdict.NEITHER_WITH_PENALTY

    def test_underfunded_uav_aborts(self):
        """A UAV deposit below the committed payments aborts before commitment."""
        report = run_protocol(self.instance, "honest", self.settings, seed=1, deposit_overrides={"uav": 0.0})
        assert report.aborted
        assert report.verdicts == []
        assert report.conservation_ok
        assert TxType.COMMIT.value not in report.tx_counts

    def test_underfunded_bidder_excluded(self):
        """A bidder without a deposit does not take part in the auction."""
        report = run_protocol(
            self.instance, "honest", self.settings, seed=1, deposit_overrides={vehicle_account(0): 0.0}
        )
        assert {v.winner for v in report.verdicts} == {1}
        assert report.verdict_counts() == {Verdict.DELIVERED_AND_PAID.value: 3}

    def test_round_cost_grows_when_undelivered(self):
        """Undelivered tasks are re-processed by the fallback server."""
        outcome = run_src_auction(self.instance.tasks, self.instance.bids, self.instance.env, self.instance.reserve)
        delivered = uav_round_cost(self.instance, outcome, {0, 1, 2}, 0, 0.81)
        undelivered = uav_round_cost(self.instance, outcome, set(), 0, 0.81)
        assert undelivered > delivered
