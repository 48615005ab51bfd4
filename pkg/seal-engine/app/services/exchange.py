"""
Commit-then-claim fair exchange between the UAV and its winning vehicles.

A round runs on a simpy clock: deposits, sealed-bid execution inside the
enclave, hashchain commitment, per-task result delivery with key release,
batch claims and refunds. Paywords and result ciphertexts travel off-ledger;
only deposits, the published outcome, the commitment, hash publications, keys,
misbehavior reports, timeouts, claims and refunds are written to the ledger.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Mapping, Optional, Set, Tuple, Union

import numpy as np
import simpy
from pydantic import BaseModel, model_validator

from app.errors import AttestationError, ParameterError, SealedDataError
from app.models import (
    CLOUD,
    AuctionInstance,
    AuctionOutcome,
    BalanceEntry,
    CombinatorialBid,
    LatencyStats,
    ProtocolReport,
    ProtocolSettings,
    TaskSpec,
    TaskVerdict,
    Transaction,
    TxType,
    Verdict,
)
from app.services.cost import (
    flight_energy,
    task_completion_time,
    transmission_time,
    truthful_price,
    uav_total_cost,
)
from app.services.crypto_primitives import (
    BoxKeyPair,
    CertificateAuthority,
    SigningIdentity,
    canonical_json,
    encode_nonce,
    from_units,
    keccak256,
    random_bytes,
    seal_to,
    symmetric_decrypt,
    symmetric_encrypt,
    to_units,
    verify_signature,
)
from app.services.enclave import Enclave, ExecutionResult, expected_measurement
from app.services.hashchain import HashChain, verify_payword
from app.services.ledger import (
    Account,
    ConsensusQueue,
    Ledger,
    Phase,
    PhaseSchedule,
    contract_tx,
    make_tx,
)

logger = logging.getLogger(__name__)

PROOF_TAG = b"seal/result-proof"
UAV = "uav"
ENCLAVE = "enclave"
EPSILON = 1e-3
_TIME_TOL = 1e-9

Channel = Union[Ledger, ConsensusQueue]


def vehicle_account(vehicle_id: int) -> str:
    return f"vehicle-{vehicle_id}"


class AdversaryScript(BaseModel):
    """
    Scripted deviation for one round.

    Text form: `honest`, `bidder_aborts:3,7`, `uav_refuses_paywords:2`,
    `wrong_key:4` or `replay:5`. Task ids name the tasks whose winner
    misbehaves; `uav_refuses_paywords:l` stops payword reveals after chain
    position l for every winner.
    """
    kind: Literal["honest", "bidder_aborts", "uav_refuses_paywords", "wrong_key", "replay"] = "honest"
    tasks: Tuple[int, ...] = ()
    after: Optional[int] = None

    @model_validator(mode="after")
    def _check_arguments(self) -> "AdversaryScript":
        if self.kind == "uav_refuses_paywords" and (self.after is None or self.after < 0):
            raise ValueError("uav_refuses_paywords needs a non-negative position")
        if self.kind in ("bidder_aborts", "wrong_key") and not self.tasks:
            raise ValueError(f"{self.kind} needs at least one task id")
        if self.kind == "replay" and len(self.tasks) != 1:
            raise ValueError("replay targets exactly one task")
        return self

    @classmethod
    def parse(cls, text: str) -> "AdversaryScript":
        name, _, argument = text.strip().partition(":")
        try:
            if name == "honest" and not argument:
                return cls()
            if name == "uav_refuses_paywords":
                return cls(kind=name, after=int(argument))
            return cls(kind=name, tasks=tuple(int(part) for part in argument.split(",") if part.strip()))
        except ValueError as e:
            raise ParameterError(f"invalid adversary script {text!r}: {e}") from e

    def label(self) -> str:
        if self.kind == "honest":
            return "honest"
        if self.kind == "uav_refuses_paywords":
            return f"{self.kind}:{self.after}"
        return f"{self.kind}:{','.join(str(t) for t in self.tasks)}"

    def targets(self, kind: str, task_id: int) -> bool:
        return self.kind == kind and task_id in self.tasks


# Off-ledger messages


@dataclass(frozen=True)
class ResultMessage:
    winner: str
    index: int
    nonce: int
    ciphertext: bytes
    digest: bytes
    proof: bytes


@dataclass(frozen=True)
class DeliveredResult:
    message: ResultMessage
    key: bytes


@dataclass(frozen=True)
class SignedPayword:
    winner: str
    index: int
    payword: bytes
    signature: str

    def body(self) -> bytes:
        return canonical_json({"winner": self.winner, "index": self.index, "payword": self.payword.hex()})


@dataclass
class WinnerCommit:
    """A winner's hashchain with its tasks in chain order."""
    account_id: str
    vehicle_id: int
    chain: HashChain
    tasks: List[int]
    deadlines: List[float]
    nonce_base: int

    @property
    def size(self) -> int:
        return len(self.tasks)

    def index_of(self, task_id: int) -> int:
        return self.tasks.index(task_id) + 1

    def payload(self) -> Dict[str, Any]:
        return {
            "winner": self.account_id,
            "root": self.chain.root.hex(),
            "length": self.chain.length,
            "payments": list(self.chain.payments),
            "tasks": list(self.tasks),
            "deadlines": list(self.deadlines),
            "nonce_base": self.nonce_base,
        }


def proof_of(ciphertext: bytes, digest: bytes) -> bytes:
    return keccak256(ciphertext, digest, PROOF_TAG)


def result_payload(task: TaskSpec) -> bytes:
    """Stand-in for the processed result of a task."""
    return canonical_json({"task": task.id, "result": keccak256(task.model_dump_json().encode("utf-8")).hex()})


# Operations


def deposit(channel: Channel, account: Account, amount: int, now: float):
    return channel.submit(make_tx(TxType.DEPOSIT, {"amount": int(amount)}, account.identity, now))


def seal_and_submit_bid(bid: CombinatorialBid, enclave: Enclave, participant_id: str) -> bytes:
    if not enclave.is_attested(participant_id):
        raise AttestationError(f"{participant_id} has not attested the enclave")
    return enclave.seal(bid)


def off_chain_execute(
    enclave: Enclave,
    channel: Channel,
    ledger: Ledger,
    sealed_bids: Mapping[int, bytes],
    instance: AuctionInstance,
    settings: ProtocolSettings,
    now: float,
    parties: List[str],
    account_of: Mapping[int, str],
) -> Optional[ExecutionResult]:
    """
    Run the auction inside the enclave and publish (allocation, payments).

    Returns None when the round aborts: execution outside the auction window
    or a UAV deposit that cannot cover the committed payments.
    """
    if not ledger.schedule.in_window(Phase.AUCTION, now):
        logger.warning(f"Auction window missed at t={now:.3f}; aborting round")
        return None
    deposits = {vehicle_id: ledger.deposits.get(account_of[vehicle_id], 0) for vehicle_id in sealed_bids}
    result = enclave.execute(
        parties, sealed_bids, deposits, instance.tasks, instance.env, instance.reserve, settings.deposit_multiplier
    )
    committed = sum(to_units(p) for p in result.outcome.critical_payment.values())
    if ledger.deposits.get(UAV, 0) < committed:
        logger.warning(f"UAV deposit {ledger.deposits.get(UAV, 0)} does not cover {committed}; aborting round")
        return None
    payload = enclave.outcome_payload(result.outcome, account_of)
    channel.submit(make_tx(TxType.OUTCOME, payload, enclave.identity, now))
    return result


def build_commit(
    outcome: AuctionOutcome,
    tasks: Mapping[int, TaskSpec],
    uav: Account,
    rng: np.random.Generator,
    exchange_start: float,
    expires_at: float,
    now: float,
) -> Tuple[Transaction, Dict[str, WinnerCommit]]:
    """One hashchain per winner over its critical payments, tasks ordered by deadline."""
    commits: Dict[str, WinnerCommit] = {}
    for vehicle_id in outcome.winners:
        ordered = sorted(outcome.tasks_of[vehicle_id], key=lambda t: (tasks[t].deadline, t))
        payments = [to_units(outcome.critical_payment[t]) for t in ordered]
        account_id = vehicle_account(vehicle_id)
        commits[account_id] = WinnerCommit(
            account_id=account_id,
            vehicle_id=vehicle_id,
            chain=HashChain.build(payments, random_bytes(rng)),
            tasks=ordered,
            deadlines=[exchange_start + tasks[t].deadline for t in ordered],
            nonce_base=int(rng.integers(0, 2 ** 31)),
        )
    payload = {
        "uav": uav.id,
        "expires_at": expires_at,
        "commitments": [commits[a].payload() for a in sorted(commits)],
    }
    return make_tx(TxType.COMMIT, payload, uav.identity, now), commits


def deliver_result(
    rng: np.random.Generator, uav_public_key, winner: str, index: int, nonce: int, payload: bytes
) -> DeliveredResult:
    """Encrypt a result under a fresh key, then to the UAV; bind the ciphertext to H(key || nonce)."""
    key = random_bytes(rng)
    ciphertext = seal_to(uav_public_key, symmetric_encrypt(key, payload, random_bytes(rng, 12)))
    digest = keccak256(key, encode_nonce(nonce))
    message = ResultMessage(winner, index, nonce, ciphertext, digest, proof_of(ciphertext, digest))
    return DeliveredResult(message=message, key=key)


def publish_hash(channel: Channel, account: Account, message: ResultMessage, now: float):
    payload = {"winner": account.id, "index": message.index, "digest": message.digest.hex(), "nonce": message.nonce}
    return channel.submit(make_tx(TxType.PUBLISH_HASH, payload, account.identity, now))


def verify_result(
    message: ResultMessage, expected_nonce: int, published: Optional[Tuple[bytes, int]]
) -> bool:
    """UAV-side check of a result message against the published hash and the expected nonce."""
    if message.nonce != expected_nonce:
        return False
    if published is None or published != (message.digest, message.nonce):
        return False
    return proof_of(message.ciphertext, message.digest) == message.proof


def open_result(uav_box: BoxKeyPair, message: ResultMessage, key: bytes) -> bytes:
    return symmetric_decrypt(key, uav_box.open(message.ciphertext))


def reveal_payword(uav: Account, commit: WinnerCommit, index: int) -> SignedPayword:
    unsigned = SignedPayword(commit.account_id, index, commit.chain.payword(index), "")
    return SignedPayword(unsigned.winner, index, unsigned.payword, uav.identity.sign(unsigned.body()))


def accept_payword(signed: SignedPayword, uav_public_hex: str, commit: WinnerCommit) -> bool:
    """Winner-side check: UAV signature and a fold back to the committed root."""
    if not verify_signature(uav_public_hex, signed.signature, signed.body()):
        return False
    return verify_payword(commit.chain.root, signed.payword, signed.index, commit.chain.payments)


def submit_key(channel: Channel, account: Account, index: int, key: bytes, nonce: int, now: float):
    payload = {"winner": account.id, "index": index, "key": key.hex(), "nonce": nonce}
    return channel.submit(make_tx(TxType.KEY, payload, account.identity, now))


def report_misbehavior(channel: Channel, uav: Account, winner: str, index: int, reason: str, now: float):
    payload = {"accused": winner, "index": index, "reason": reason}
    return channel.submit(make_tx(TxType.MISBEHAVIOR, payload, uav.identity, now))


def timeout(channel: Channel, winner: str, index: int, now: float):
    return channel.submit(contract_tx(TxType.TIMEOUT, {"winner": winner, "index": index}, now))


def claim(channel: Channel, account: Account, payword: bytes, count: int, now: float):
    payload = {"winner": account.id, "payword": payword.hex(), "count": count}
    return channel.submit(make_tx(TxType.CLAIM, payload, account.identity, now))


def refund(channel: Channel, account: Account, amount: int, now: float):
    return channel.submit(make_tx(TxType.REFUND, {"amount": int(amount)}, account.identity, now))


def uav_round_cost(
    instance: AuctionInstance,
    outcome: Optional[AuctionOutcome],
    delivered: Set[int],
    payout_units: int,
    key_grace: float,
) -> float:
    """
    UAV cost of a round as it actually played out.

    Undelivered vehicle tasks are re-uploaded to the fallback server after the
    UAV has hovered until their key deadline.
    """
    env = instance.env
    server = env.fallback
    hover = 0.0
    transmit = 0.0
    payments = [from_units(payout_units)]
    for task in instance.tasks:
        who = CLOUD if outcome is None else outcome.winner_of.get(task.id, CLOUD)
        if who != CLOUD:
            rate = env.link_rate[who]
            transmit += transmission_time(task, rate)
            if task.id in delivered:
                hover += task_completion_time(task, instance.bid_of(who).resources[task.id], rate)
                continue
            hover += task.deadline + key_grace
        hover += task_completion_time(task, server.compute, server.link_rate)
        transmit += transmission_time(task, server.link_rate)
        payments.append(server.price)
    energy = flight_energy(env.energy) + env.energy.p_hover * hover + env.energy.p_a2g * transmit
    return uav_total_cost(energy, payments, env.weights)


class ProtocolRound:
    """State and simpy processes of one exchange round."""

    def __init__(
        self,
        instance: AuctionInstance,
        script: AdversaryScript,
        settings: ProtocolSettings,
        seed: int,
        deposit_overrides: Optional[Mapping[str, float]] = None,
    ):
        self.instance = instance
        self.script = script
        self.settings = settings
        self.tasks = {task.id: task for task in instance.tasks}
        self.rng = np.random.default_rng([seed, 0x5EA1])
        self.env = simpy.Environment()
        self.grace = settings.effective_key_grace
        self.schedule = PhaseSchedule.build(
            settings.phase_window,
            max((task.deadline for task in instance.tasks), default=0.0),
            settings.consensus_delay[1],
            settings.claim_window,
            self.grace,
        )
        self.authority = CertificateAuthority(SigningIdentity.generate(self.rng))
        self.ledger = Ledger(
            schedule=self.schedule,
            authority=self.authority,
            slash_fraction=settings.slash_fraction,
            key_grace=self.grace,
        )
        self.queue = ConsensusQueue(self.env, self.ledger, self.rng, settings.consensus_delay)

        self.agreed = {
            "reserve": instance.reserve,
            "weights": instance.env.weights.model_dump(mode="json"),
            "energy": instance.env.energy.model_dump(mode="json"),
            "deposit_multiplier": settings.deposit_multiplier,
        }
        self.enclave = Enclave(self.rng, self.agreed)
        self.uav_box = BoxKeyPair.generate(self.rng)

        overrides = {k: to_units(v) for k, v in (deposit_overrides or {}).items()}
        bidder_deposit = to_units(instance.reserve * settings.deposit_multiplier)
        uav_deposit = to_units(instance.reserve) * len(instance.tasks)
        self.bidders = [bid for bid in sorted(instance.bids, key=lambda b: b.vehicle_id) if bid.bundle]
        self.account_of = {bid.vehicle_id: vehicle_account(bid.vehicle_id) for bid in self.bidders}

        self.deposit_plan: Dict[str, int] = {UAV: overrides.get(UAV, uav_deposit)}
        for account_id in self.account_of.values():
            self.deposit_plan[account_id] = overrides.get(account_id, bidder_deposit)
        self._open_account(UAV, "uav", 2 * max(uav_deposit, self.deposit_plan[UAV], 1))
        for account_id in self.account_of.values():
            self._open_account(account_id, "vehicle", 2 * max(bidder_deposit, self.deposit_plan[account_id], 1))
        self._open_account(ENCLAVE, "enclave", 0)
        self.initial = {a.id: a.wallet for a in self.ledger.accounts.values()}
        self.initial_supply = self.ledger.total_supply()

        self.aborted = False
        self.outcome: Optional[AuctionOutcome] = None
        self.commits: Dict[str, WinnerCommit] = {}
        self.delivered_results: Dict[Tuple[str, int], DeliveredResult] = {}
        self.received: Dict[Tuple[str, int], ResultMessage] = {}
        self.verified: Dict[str, Set[int]] = {}
        self.revealed: Dict[str, Set[int]] = {}
        self.held: Dict[str, int] = {}
        self.claim_counts: Dict[str, int] = {}
        self.computed: Dict[str, List[int]] = {}
        self.payword_events: Dict[Tuple[str, int], simpy.Event] = {}

    def _open_account(self, account_id: str, role: str, wallet: int) -> None:
        identity = self.enclave.identity if role == "enclave" else SigningIdentity.generate(self.rng)
        account = Account(id=account_id, identity=identity, wallet=wallet, role=role)
        account.certificate = self.authority.issue(identity.public_hex, 0.0, self.settings.certificate_ttl)
        self.ledger.register(account)

    @property
    def uav(self) -> Account:
        return self.ledger.accounts[UAV]

    def _until(self, t: float) -> simpy.Event:
        return self.env.timeout(max(0.0, t - self.env.now))

    def run(self) -> ProtocolReport:
        self.env.process(self._round())
        self.env.run()
        return self._report()

    def _round(self):
        parties = [UAV] + list(self.account_of.values())
        measurement = expected_measurement(self.agreed)
        for party in parties:
            self.enclave.attest(party, measurement)
        sealed = {
            bid.vehicle_id: seal_and_submit_bid(bid, self.enclave, self.account_of[bid.vehicle_id])
            for bid in self.bidders
        }

        yield self._until(self.schedule.t1 + EPSILON)
        for account_id, amount in self.deposit_plan.items():
            deposit(self.queue, self.ledger.accounts[account_id], amount, self.env.now)

        yield self._until(self.schedule.t2 + EPSILON)
        result = off_chain_execute(
            self.enclave, self.queue, self.ledger, sealed, self.instance, self.settings,
            self.env.now, parties, self.account_of,
        )
        if result is None:
            self.aborted = True
        else:
            self.outcome = result.outcome
            yield self._until(self.schedule.t3 + EPSILON)
            tx, self.commits = build_commit(
                self.outcome, self.tasks, self.uav, self.rng, self.schedule.t4, self.schedule.t_exp, self.env.now
            )
            self.queue.submit(tx)

            yield self._until(self.schedule.t4)
            for commit in self.commits.values():
                self.verified[commit.account_id] = set()
                self.revealed[commit.account_id] = set()
                for index in range(1, commit.size + 1):
                    self.payword_events[(commit.account_id, index)] = self.env.event()
                    self.env.process(self._vehicle_task(commit, index))
                    self.env.process(self._deadline_watch(commit, index))
                    self.env.process(self._contract_timeout(commit, index))

            yield self._until(self.schedule.exchange_close + EPSILON)
            for account_id, commit in sorted(self.commits.items()):
                count = self.held.get(account_id, 0)
                if count >= 1:
                    self.claim_counts[account_id] = count
                    claim(self.queue, self.ledger.accounts[account_id], commit.chain.payword(count), count,
                          self.env.now)

        yield self._until(self.schedule.t_exp + EPSILON)
        for account_id in sorted(self.ledger.accounts):
            remaining = self.ledger.deposits.get(account_id, 0)
            if remaining > 0:
                refund(self.queue, self.ledger.accounts[account_id], remaining, self.env.now)

    def _vehicle_task(self, commit: WinnerCommit, index: int):
        task = self.tasks[commit.tasks[index - 1]]
        account = self.ledger.accounts[commit.account_id]
        if self.script.targets("bidder_aborts", task.id):
            logger.info(f"{commit.account_id} aborts task {task.id}")
            return
        bid = self.instance.bid_of(commit.vehicle_id)
        rate = self.instance.env.link_rate[commit.vehicle_id]
        yield self.env.timeout(task_completion_time(task, bid.resources[task.id], rate))

        nonce = commit.nonce_base + index
        if self.script.targets("replay", task.id):
            nonce -= 1
            logger.info(f"{commit.account_id} replays a stale result for task {task.id}")
        else:
            self.computed.setdefault(commit.account_id, []).append(task.id)
        delivered = deliver_result(
            self.rng, self.uav_box.public_key, commit.account_id, index, nonce, result_payload(task)
        )
        self.delivered_results[(commit.account_id, index)] = delivered
        confirmation = publish_hash(self.queue, account, delivered.message, self.env.now)
        self.env.process(self._uav_receive(commit, index, delivered.message, confirmation))

        arrival = self.payword_events[(commit.account_id, index)]
        yield arrival | self._until(self.ledger.key_deadline(commit.account_id, index))
        if not arrival.triggered:
            return
        key = delivered.key
        if self.script.targets("wrong_key", task.id):
            key = random_bytes(self.rng)
        submit_key(self.queue, account, index, key, nonce, self.env.now)

    def _uav_receive(self, commit: WinnerCommit, index: int, message: ResultMessage, confirmation: simpy.Event):
        yield confirmation
        published = self.ledger.published_hashes.get((commit.account_id, index))
        if verify_result(message, commit.nonce_base + index, published):
            self.received[(commit.account_id, index)] = message
            self.verified[commit.account_id].add(index)
            self._advance_paywords(commit)
        else:
            logger.warning(f"Result proof from {commit.account_id} for position {index} failed")
            report_misbehavior(self.queue, self.uav, commit.account_id, index, "proof", self.env.now)

    def _deadline_watch(self, commit: WinnerCommit, index: int):
        yield self._until(commit.deadlines[index - 1])
        self._advance_paywords(commit)

    def _contract_timeout(self, commit: WinnerCommit, index: int):
        due = self.ledger.key_deadline(commit.account_id, index) + self.settings.consensus_delay[1] + EPSILON
        yield self._until(due)
        if not self.ledger.is_settled(commit.account_id, index):
            timeout(self.queue, commit.account_id, index, self.env.now)

    def _advance_paywords(self, commit: WinnerCommit) -> None:
        """Reveal every verified position whose predecessors are verified or past their deadline."""
        account_id = commit.account_id
        verified = self.verified[account_id]
        limit = commit.size
        if self.script.kind == "uav_refuses_paywords":
            limit = min(limit, self.script.after)
        for index in range(1, limit + 1):
            if index in self.revealed[account_id] or index not in verified:
                continue
            ready = all(
                q in verified or self.env.now + _TIME_TOL >= commit.deadlines[q - 1] for q in range(1, index)
            )
            if not ready:
                continue
            signed = reveal_payword(self.uav, commit, index)
            self.revealed[account_id].add(index)
            if accept_payword(signed, self.uav.identity.public_hex, commit):
                self.held[account_id] = max(self.held.get(account_id, 0), index)
                self.payword_events[(account_id, index)].succeed(signed)

    # reporting

    def _verdicts(self) -> Tuple[List[TaskVerdict], Set[int]]:
        verdicts: List[TaskVerdict] = []
        delivered_tasks: Set[int] = set()
        for account_id, commit in sorted(self.commits.items()):
            failed = self.ledger.failed_tasks.get(account_id, set())
            count = self.claim_counts.get(account_id, 0) if account_id in self.ledger.claimed else 0
            for index, task_id in enumerate(commit.tasks, start=1):
                key = self.ledger.released_keys.get((account_id, index))
                message = self.received.get((account_id, index))
                delivered = False
                if key is not None and message is not None:
                    try:
                        open_result(self.uav_box, message, key)
                        delivered = True
                    except SealedDataError:
                        delivered = False
                paid = index <= count and index not in failed
                if delivered:
                    delivered_tasks.add(task_id)
                if delivered and paid:
                    verdict, fault = Verdict.DELIVERED_AND_PAID, None
                elif not delivered and not paid:
                    verdict = Verdict.NEITHER_WITH_PENALTY
                    fault = "bidder" if (account_id, index) in self.ledger.slashed else "uav"
                else:
                    verdict, fault = Verdict.VIOLATION, None
                    logger.error(f"Atomicity violated for task {task_id} of {account_id}")
                verdicts.append(TaskVerdict(
                    task_id=task_id, winner=commit.vehicle_id, index=index, verdict=verdict,
                    delivered=delivered, paid=paid, fault=fault,
                ))
        return verdicts, delivered_tasks

    def _report(self) -> ProtocolReport:
        verdicts, delivered_tasks = self._verdicts()
        balances = {
            account_id: BalanceEntry(initial=self.initial[account_id], final=account.wallet)
            for account_id, account in sorted(self.ledger.accounts.items())
        }
        payoffs: Dict[str, float] = {}
        for vehicle_id, account_id in self.account_of.items():
            vehicle = self.instance.vehicle(vehicle_id)
            resources = self.instance.bid_of(vehicle_id).resources
            spent = sum(
                truthful_price(vehicle.unit_cost, resources[t], vehicle.fixed_cost)
                for t in self.computed.get(account_id, [])
            )
            delta = self.ledger.accounts[account_id].wallet - self.initial[account_id]
            payoffs[account_id] = from_units(delta) - spent
        payouts = sum(self.ledger.claimed.values())
        payoffs[UAV] = -uav_round_cost(self.instance, self.outcome, delivered_tasks, payouts, self.grace)

        latencies = np.asarray(self.queue.latencies, dtype=float)
        latency = LatencyStats()
        if latencies.size:
            latency = LatencyStats(
                count=int(latencies.size), mean=float(latencies.mean()),
                min=float(latencies.min()), max=float(latencies.max()),
            )
        sizes = Counter()
        for tx in self.ledger.log:
            sizes[tx.type.value] += len(tx.model_dump_json())
        report = ProtocolReport(
            script=self.script.label(),
            aborted=self.aborted,
            verdicts=verdicts,
            balances=balances,
            escrow=self.ledger.escrow,
            penalty_pool=self.ledger.penalty_pool,
            failed_tasks={
                account_id: sorted(self.commits[account_id].tasks[i - 1] for i in indices)
                for account_id, indices in sorted(self.ledger.failed_tasks.items())
            },
            tx_counts=dict(Counter(tx.type.value for tx in self.ledger.log)),
            ledger_bytes={
                "commit": sizes[TxType.COMMIT.value],
                "claim": sizes[TxType.CLAIM.value],
                "total": len(self.ledger.to_jsonl()),
            },
            conservation_ok=(
                self.ledger.total_supply() == self.initial_supply and self.ledger.escrow_consistent()
            ),
            payoffs=payoffs,
            consensus_latency=latency,
            log=list(self.ledger.log),
        )
        logger.info(f"Protocol round ({report.script}) finished: {report.verdict_counts()}")
        return report


def run_protocol(
    instance: AuctionInstance,
    script: Union[str, AdversaryScript] = "honest",
    settings: Optional[ProtocolSettings] = None,
    seed: int = 0,
    deposit_overrides: Optional[Mapping[str, float]] = None,
) -> ProtocolReport:
    """Drive one full round on the simulated ledger and judge every vehicle-assigned task."""
    if isinstance(script, str):
        script = AdversaryScript.parse(script)
    round_ = ProtocolRound(instance, script, settings or ProtocolSettings(), seed, deposit_overrides)
    return round_.run()
