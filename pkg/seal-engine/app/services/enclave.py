"""
Simulated trusted execution boundary for the sealed-bid auction.

Bids are sealed to the enclave's public key and can only be opened inside it.
The enclave runs the auction after every contracting party has attested its
measurement (program bytes plus configuration digest) and releases nothing
but the published view of the outcome.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set

import numpy as np
from pydantic import BaseModel, Field

from app.errors import AttestationError, SealedDataError
from app.models import AuctionEnvironment, AuctionOutcome, CombinatorialBid, TaskSpec
from app.services import auction
from app.services.crypto_primitives import (
    BoxKeyPair,
    SigningIdentity,
    canonical_json,
    keccak256,
    seal_to,
    to_units,
)

logger = logging.getLogger(__name__)


def program_bytes() -> bytes:
    return Path(auction.__file__).read_bytes()


def expected_measurement(config: Mapping[str, Any], program: Optional[bytes] = None) -> bytes:
    """What a participant expects the enclave to report for the agreed program and configuration."""
    program = program_bytes() if program is None else program
    return keccak256(program, keccak256(canonical_json(dict(config))))


class ExecutionResult(BaseModel):
    outcome: AuctionOutcome
    admitted: List[int] = Field(default_factory=list)
    excluded: List[int] = Field(default_factory=list, description="Bidders whose deposit did not cover their bids")


class Enclave:
    def __init__(self, rng: np.random.Generator, config: Mapping[str, Any], program: Optional[bytes] = None):
        self.program_hash = expected_measurement(config, program)
        self._box = BoxKeyPair.generate(rng)
        self.identity = SigningIdentity.generate(rng)
        self.attested_by: Set[str] = set()

    @property
    def public_key(self):
        return self._box.public_key

    def attest(self, participant_id: str, expected: bytes) -> None:
        if expected != self.program_hash:
            logger.error(f"Attestation by {participant_id} failed: measurement mismatch")
            raise AttestationError(f"{participant_id} expected a different enclave measurement")
        self.attested_by.add(participant_id)

    def is_attested(self, participant_id: str) -> bool:
        return participant_id in self.attested_by

    def seal(self, bid: CombinatorialBid) -> bytes:
        return seal_to(self.public_key, bid.model_dump_json().encode("utf-8"))

    def unseal(self, blob: bytes) -> CombinatorialBid:
        plaintext = self._box.open(blob)
        try:
            return CombinatorialBid.model_validate_json(plaintext)
        except ValueError as e:
            raise SealedDataError("sealed payload is not a bid") from e

    def execute(
        self,
        parties: Sequence[str],
        sealed_bids: Mapping[int, bytes],
        deposits: Mapping[int, int],
        tasks: Sequence[TaskSpec],
        env: AuctionEnvironment,
        reserve: float,
        deposit_multiplier: float,
    ) -> ExecutionResult:
        """
        Unseal, screen deposits and run the auction.

        A bidder is admitted when its deposit covers its largest admissible
        price times the multiplier; prices above the reserve can never win and
        are not counted.
        """
        missing = [p for p in parties if p not in self.attested_by]
        if missing:
            raise AttestationError(f"parties have not attested: {', '.join(sorted(missing))}")

        admitted: List[CombinatorialBid] = []
        excluded: List[int] = []
        for vehicle_id in sorted(sealed_bids):
            bid = self.unseal(sealed_bids[vehicle_id])
            admissible = [p for p in bid.prices.values() if p <= reserve]
            required = to_units(max(admissible, default=0.0) * deposit_multiplier)
            if deposits.get(vehicle_id, 0) < required:
                logger.warning(
                    f"Excluding vehicle {vehicle_id}: deposit {deposits.get(vehicle_id, 0)} below {required}"
                )
                excluded.append(vehicle_id)
                continue
            admitted.append(bid)

        outcome = auction.run_src_auction(tasks, admitted, env, reserve)
        return ExecutionResult(outcome=outcome, admitted=[b.vehicle_id for b in admitted], excluded=excluded)

    def outcome_payload(self, outcome: AuctionOutcome, account_of: Mapping[int, str]) -> Dict[str, Any]:
        """Ledger form of the published view: assignees by account, payments in currency units."""
        view = outcome.public_view()
        return {
            "winner_of": {
                str(task_id): (who if isinstance(who, str) else account_of[who])
                for task_id, who in sorted(view.winner_of.items())
            },
            "payments": {str(task_id): to_units(p) for task_id, p in sorted(view.critical_payment.items())},
        }
