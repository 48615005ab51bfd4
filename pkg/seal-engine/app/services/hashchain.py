"""
Payword hashchains binding a winner's payment vector.

Elements run from the root h^0 to a random tail h^{n+1}:
h^z = H(h^{z+1} || p^z) for 1 <= z <= n and h^0 = H(h^1).
Completing task z earns the payword h^{z+1}; a claim for N tasks submits
h^{N+1} and N, and the ledger folds it back to the root.
"""

from dataclasses import dataclass
from typing import Iterable, List, Sequence

from app.services.crypto_primitives import DIGEST_SIZE, encode_amount, keccak256


@dataclass
class HashChain:
    elements: List[bytes]
    payments: List[int]

    @classmethod
    def build(cls, payments: Sequence[int], tail: bytes) -> "HashChain":
        if len(tail) != DIGEST_SIZE:
            raise ValueError(f"tail must be {DIGEST_SIZE} bytes")
        if any(p < 0 for p in payments):
            raise ValueError("payments must be non-negative")
        n = len(payments)
        elements: List[bytes] = [b""] * (n + 2)
        elements[n + 1] = tail
        for z in range(n, 0, -1):
            elements[z] = keccak256(elements[z + 1], encode_amount(payments[z - 1]))
        elements[0] = keccak256(elements[1])
        return cls(elements=elements, payments=list(payments))

    @property
    def root(self) -> bytes:
        return self.elements[0]

    @property
    def length(self) -> int:
        return len(self.elements)

    def payword(self, index: int) -> bytes:
        """Payword earned by completing the task at 1-based chain position `index`."""
        if not 1 <= index <= len(self.payments):
            raise IndexError(f"index {index} outside 1..{len(self.payments)}")
        return self.elements[index + 1]


def fold_to_root(payword: bytes, count: int, payments: Sequence[int]) -> bytes:
    h = payword
    for z in range(count, 0, -1):
        h = keccak256(h, encode_amount(payments[z - 1]))
    return keccak256(h)


def verify_payword(root: bytes, payword: bytes, count: int, payments: Sequence[int]) -> bool:
    if not 1 <= count <= len(payments) or len(payword) != DIGEST_SIZE:
        return False
    return fold_to_root(payword, count, payments) == root


def claimable_amount(payments: Sequence[int], count: int, failed: Iterable[int]) -> int:
    """Authorized payments up to `count` minus failed positions within that prefix."""
    failed_in_prefix = {z for z in failed if 1 <= z <= count}
    return sum(payments[:count]) - sum(payments[z - 1] for z in failed_in_prefix)
