"""
Simulated ordered ledger with the commit-then-claim contract.

The ledger is a single writer: every state change is a Transaction applied in
confirmation order. Protocol-level failures never raise; they are recorded as
rejected transactions carrying an ErrorCode, or as failed-task entries.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
import simpy
from pydantic import BaseModel

from app.errors import ErrorCode
from app.models import Transaction, TxStatus, TxType
from app.services.crypto_primitives import (
    Certificate,
    CertificateAuthority,
    SigningIdentity,
    canonical_json,
    encode_nonce,
    keccak256,
    verify_signature,
)
from app.services.hashchain import claimable_amount, verify_payword

logger = logging.getLogger(__name__)

CONTRACT_PK = "contract"


class Phase(str, Enum):
    DEPOSIT = "deposit"
    AUCTION = "auction"
    COMMIT = "commit"
    EXCHANGE = "exchange"
    CLAIM = "claim"
    REFUND = "refund"


class PhaseSchedule(BaseModel):
    """Logical phase boundaries T_0..T_4 plus exchange close and expiry."""
    t0: float = 0.0
    t1: float
    t2: float
    t3: float
    t4: float
    exchange_close: float
    t_exp: float

    @classmethod
    def build(
        cls, window: float, max_deadline: float, max_delay: float, claim_window: float, key_grace: float = 0.0
    ) -> "PhaseSchedule":
        """Exchange closes once every key and contract timeout for the latest deadline has confirmed."""
        t1 = window
        t2 = t1 + window
        t3 = t2 + window
        t4 = t3 + window
        close = t4 + max_deadline + key_grace + 2 * max_delay + window
        return cls(t1=t1, t2=t2, t3=t3, t4=t4, exchange_close=close, t_exp=close + claim_window)

    def in_window(self, phase: Phase, t: float) -> bool:
        if phase == Phase.DEPOSIT:
            return self.t1 < t < self.t2
        if phase == Phase.AUCTION:
            return self.t2 < t < self.t3
        if phase == Phase.COMMIT:
            return self.t3 < t < self.t4
        if phase == Phase.EXCHANGE:
            return self.t4 <= t <= self.exchange_close
        if phase == Phase.CLAIM:
            return self.exchange_close < t < self.t_exp
        return t >= self.t_exp


@dataclass
class Account:
    id: str
    identity: SigningIdentity
    wallet: int
    certificate: Optional[Certificate] = None
    role: str = "vehicle"


@dataclass
class CommitMeta:
    root: bytes
    length: int
    payments: List[int]
    tasks: List[int]
    deadlines: List[float]
    nonce_base: int
    deposit_share: int = 0

    @property
    def size(self) -> int:
        return len(self.payments)


def signing_body(tx: Transaction) -> bytes:
    return canonical_json({"type": tx.type.value, "payload": tx.payload, "pk": tx.pk, "timestamp": tx.timestamp})


def make_tx(tx_type: TxType, payload: Dict[str, Any], identity: SigningIdentity, timestamp: float) -> Transaction:
    tx = Transaction(type=tx_type, payload=payload, pk=identity.public_hex, timestamp=timestamp)
    tx.signature = identity.sign(signing_body(tx))
    return tx


def contract_tx(tx_type: TxType, payload: Dict[str, Any], timestamp: float) -> Transaction:
    """Record emitted by the contract itself (timeouts); unsigned."""
    return Transaction(type=tx_type, payload=payload, pk=CONTRACT_PK, timestamp=timestamp)


@dataclass
class Ledger:
    schedule: PhaseSchedule
    authority: CertificateAuthority
    slash_fraction: float = 1.0
    key_grace: float = 0.0
    clock: float = 0.0
    accounts: Dict[str, Account] = field(default_factory=dict)
    deposits: Dict[str, int] = field(default_factory=dict)
    escrow: int = 0
    penalty_pool: int = 0
    outcome: Optional[Dict[str, Any]] = None
    commit_meta: Dict[str, CommitMeta] = field(default_factory=dict)
    published_hashes: Dict[Tuple[str, int], Tuple[bytes, int]] = field(default_factory=dict)
    released_keys: Dict[Tuple[str, int], bytes] = field(default_factory=dict)
    failed_tasks: Dict[str, Set[int]] = field(default_factory=dict)
    misbehavior: Set[Tuple[str, int]] = field(default_factory=set)
    slashed: Set[Tuple[str, int]] = field(default_factory=set)
    claimed: Dict[str, int] = field(default_factory=dict)
    refunded: Set[str] = field(default_factory=set)
    log: List[Transaction] = field(default_factory=list)
    _by_pk: Dict[str, str] = field(default_factory=dict)

    def register(self, account: Account) -> None:
        self.accounts[account.id] = account
        self._by_pk[account.identity.public_hex] = account.id
        self.deposits.setdefault(account.id, 0)

    def account_for(self, pk: str) -> Optional[Account]:
        account_id = self._by_pk.get(pk)
        return self.accounts.get(account_id) if account_id else None

    def total_supply(self) -> int:
        return sum(a.wallet for a in self.accounts.values()) + self.escrow

    def escrow_consistent(self) -> bool:
        return self.escrow == sum(self.deposits.values()) + self.penalty_pool

    def submit(self, tx: Transaction) -> Transaction:
        """Apply immediately at the current clock."""
        return self.apply(tx)

    def apply(self, tx: Transaction) -> Transaction:
        tx.seq = len(self.log)
        tx.confirmed_at = self.clock
        reason = self._authenticate(tx)
        if reason is None:
            handler = getattr(self, f"_on_{tx.type.value}")
            reason = handler(tx)
        if reason is None:
            tx.status = TxStatus.CONFIRMED
        else:
            tx.status = TxStatus.REJECTED
            tx.reason = reason.value
            logger.warning(f"Rejected {tx.type.value} tx #{tx.seq}: {reason.value}")
        self.log.append(tx)
        return tx

    def _authenticate(self, tx: Transaction) -> Optional[ErrorCode]:
        if tx.pk == CONTRACT_PK:
            return None if tx.type == TxType.TIMEOUT else ErrorCode.BAD_SIGNATURE
        account = self.account_for(tx.pk)
        if account is None:
            return ErrorCode.UNKNOWN_ACCOUNT
        if account.certificate is None:
            return ErrorCode.NO_CERTIFICATE
        if not self.authority.verify(account.certificate, tx.timestamp):
            return ErrorCode.CERTIFICATE_EXPIRED
        if not verify_signature(tx.pk, tx.signature, signing_body(tx)):
            return ErrorCode.BAD_SIGNATURE
        return None

    # helpers

    def _sender(self, tx: Transaction) -> Account:
        return self.account_for(tx.pk)

    def _fail(self, winner: str, index: int, slash: bool) -> None:
        self.failed_tasks.setdefault(winner, set()).add(index)
        if slash:
            self._slash(winner, index)

    def _slash(self, winner: str, index: int) -> None:
        if (winner, index) in self.slashed:
            return
        meta = self.commit_meta[winner]
        amount = min(self.deposits.get(winner, 0), int(meta.deposit_share * self.slash_fraction))
        self.deposits[winner] -= amount
        self.penalty_pool += amount
        self.slashed.add((winner, index))
        logger.info(f"Slashed {amount} units from {winner} for task position {index}")

    def is_settled(self, winner: str, index: int) -> bool:
        return (winner, index) in self.released_keys or index in self.failed_tasks.get(winner, set())

    def deadline(self, winner: str, index: int) -> float:
        return self.commit_meta[winner].deadlines[index - 1]

    def key_deadline(self, winner: str, index: int) -> float:
        return self.deadline(winner, index) + self.key_grace

    # handlers, one per transaction type

    def _on_deposit(self, tx: Transaction) -> Optional[ErrorCode]:
        if not self.schedule.in_window(Phase.DEPOSIT, tx.timestamp):
            return ErrorCode.OUT_OF_WINDOW
        account = self._sender(tx)
        amount = int(tx.payload["amount"])
        if amount < 0 or amount > account.wallet:
            return ErrorCode.INSUFFICIENT_BALANCE
        account.wallet -= amount
        self.deposits[account.id] += amount
        self.escrow += amount
        tx.effects = {"depo": self.deposits[account.id]}
        return None

    def _on_outcome(self, tx: Transaction) -> Optional[ErrorCode]:
        if not self.schedule.in_window(Phase.AUCTION, tx.timestamp):
            return ErrorCode.OUT_OF_WINDOW
        if self._sender(tx).role != "enclave":
            return ErrorCode.UNKNOWN_ACCOUNT
        if self.outcome is not None:
            return ErrorCode.DUPLICATE
        self.outcome = dict(tx.payload)
        return None

    def _on_commit(self, tx: Transaction) -> Optional[ErrorCode]:
        if not self.schedule.in_window(Phase.COMMIT, tx.timestamp):
            return ErrorCode.OUT_OF_WINDOW
        if self._sender(tx).role != "uav":
            return ErrorCode.UNKNOWN_ACCOUNT
        if self.commit_meta:
            return ErrorCode.DUPLICATE
        for entry in tx.payload["commitments"]:
            payments = [int(p) for p in entry["payments"]]
            winner = entry["winner"]
            self.commit_meta[winner] = CommitMeta(
                root=bytes.fromhex(entry["root"]),
                length=int(entry["length"]),
                payments=payments,
                tasks=[int(t) for t in entry["tasks"]],
                deadlines=[float(d) for d in entry["deadlines"]],
                nonce_base=int(entry["nonce_base"]),
                deposit_share=self.deposits.get(winner, 0) // max(1, len(payments)),
            )
        return None

    def _on_publish_hash(self, tx: Transaction) -> Optional[ErrorCode]:
        winner = self._sender(tx).id
        meta = self.commit_meta.get(winner)
        if meta is None:
            return ErrorCode.NO_COMMITMENT
        index = int(tx.payload["index"])
        if not 1 <= index <= meta.size:
            return ErrorCode.COUNT_OUT_OF_RANGE
        if (winner, index) in self.published_hashes:
            return ErrorCode.DUPLICATE
        if int(tx.payload["nonce"]) != meta.nonce_base + index:
            return ErrorCode.STALE_NONCE
        if not self.schedule.in_window(Phase.EXCHANGE, tx.timestamp) or tx.timestamp > self.deadline(winner, index):
            return ErrorCode.OUT_OF_WINDOW
        self.published_hashes[(winner, index)] = (bytes.fromhex(tx.payload["digest"]), int(tx.payload["nonce"]))
        return None

    def _on_key(self, tx: Transaction) -> Optional[ErrorCode]:
        winner = self._sender(tx).id
        index = int(tx.payload["index"])
        published = self.published_hashes.get((winner, index))
        if published is None:
            return ErrorCode.HASH_NOT_PUBLISHED
        if self.is_settled(winner, index):
            return ErrorCode.ALREADY_SETTLED
        digest, nonce = published
        key = bytes.fromhex(tx.payload["key"])
        if (winner, index) in self.misbehavior:
            self._fail(winner, index, slash=True)
            tx.effects = {"released": False, "cause": "reported"}
        elif keccak256(key, encode_nonce(nonce)) != digest:
            self._fail(winner, index, slash=True)
            tx.effects = {"released": False, "cause": "hash_mismatch"}
        elif tx.timestamp > self.key_deadline(winner, index):
            self._fail(winner, index, slash=True)
            tx.effects = {"released": False, "cause": "late"}
        else:
            self.released_keys[(winner, index)] = key
            tx.effects = {"released": True}
        return None

    def _on_misbehavior(self, tx: Transaction) -> Optional[ErrorCode]:
        if self._sender(tx).role != "uav":
            return ErrorCode.UNKNOWN_ACCOUNT
        accused = tx.payload["accused"]
        if accused not in self.commit_meta:
            return ErrorCode.NO_COMMITMENT
        index = int(tx.payload["index"])
        self.misbehavior.add((accused, index))
        self._slash(accused, index)
        return None

    def _on_timeout(self, tx: Transaction) -> Optional[ErrorCode]:
        winner = tx.payload["winner"]
        index = int(tx.payload["index"])
        if winner not in self.commit_meta:
            return ErrorCode.NO_COMMITMENT
        if tx.timestamp <= self.key_deadline(winner, index):
            return ErrorCode.DEADLINE_PENDING
        if self.is_settled(winner, index):
            return ErrorCode.ALREADY_SETTLED
        # a hash published in time shows delivery; the missing key is then not the bidder's fault
        at_fault = (winner, index) not in self.published_hashes or (winner, index) in self.misbehavior
        self._fail(winner, index, slash=at_fault)
        tx.effects = {"slashed": at_fault}
        return None

    def _on_claim(self, tx: Transaction) -> Optional[ErrorCode]:
        if not self.schedule.in_window(Phase.CLAIM, tx.timestamp):
            return ErrorCode.OUT_OF_WINDOW
        account = self._sender(tx)
        meta = self.commit_meta.get(account.id)
        if meta is None:
            return ErrorCode.NO_COMMITMENT
        if account.id in self.claimed:
            return ErrorCode.DUPLICATE
        count = int(tx.payload["count"])
        if not 1 <= count <= meta.size:
            return ErrorCode.COUNT_OUT_OF_RANGE
        if not verify_payword(meta.root, bytes.fromhex(tx.payload["payword"]), count, meta.payments):
            return ErrorCode.ROOT_MISMATCH
        payout = claimable_amount(meta.payments, count, self.failed_tasks.get(account.id, set()))
        uav = next(a for a in self.accounts.values() if a.role == "uav")
        if self.deposits[uav.id] < payout:
            return ErrorCode.INSUFFICIENT_DEPOSIT
        self.deposits[uav.id] -= payout
        self.escrow -= payout
        account.wallet += payout
        self.claimed[account.id] = payout
        tx.effects = {"payout": payout}
        return None

    def _on_refund(self, tx: Transaction) -> Optional[ErrorCode]:
        if not self.schedule.in_window(Phase.REFUND, tx.timestamp):
            return ErrorCode.OUT_OF_WINDOW
        account = self._sender(tx)
        if account.id in self.refunded:
            return ErrorCode.ALREADY_REFUNDED
        amount = int(tx.payload["amount"])
        if amount != self.deposits.get(account.id, 0):
            return ErrorCode.AMOUNT_MISMATCH
        self.deposits[account.id] = 0
        self.escrow -= amount
        account.wallet += amount
        self.refunded.add(account.id)
        tx.effects = {"refunded": amount}
        return None

    def to_jsonl(self) -> str:
        return "".join(tx.model_dump_json() + "\n" for tx in self.log)


class ConsensusQueue:
    """
    Orders submissions through a simpy clock.

    Each transaction is confirmed after a random delay, never before an
    earlier submission, so the ledger sees submission order.
    """

    def __init__(self, env: simpy.Environment, ledger: Ledger, rng: np.random.Generator,
                 delay_range: Tuple[float, float]):
        self.env = env
        self.ledger = ledger
        self.rng = rng
        self.delay_range = delay_range
        self.latencies: List[float] = []
        self._last = 0.0

    def submit(self, tx: Transaction) -> simpy.Event:
        delay = float(self.rng.uniform(*self.delay_range))
        confirm_at = max(self._last, self.env.now + delay)
        self._last = confirm_at
        self.latencies.append(confirm_at - self.env.now)
        done = self.env.event()
        self.env.process(self._confirm(tx, confirm_at, done))
        return done

    def _confirm(self, tx: Transaction, confirm_at: float, done: simpy.Event):
        yield self.env.timeout(confirm_at - self.env.now)
        self.ledger.clock = self.env.now
        done.succeed(self.ledger.apply(tx))
