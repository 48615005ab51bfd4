"""
Error types shared across the SEAL engine services.
"""

from enum import Enum
from typing import List, Optional


class ErrorCode(str, Enum):
    """Reason codes recorded on rejected ledger transactions."""
    BAD_SIGNATURE = "bad_signature"
    NO_CERTIFICATE = "no_certificate"
    CERTIFICATE_EXPIRED = "certificate_expired"
    OUT_OF_WINDOW = "out_of_window"
    INSUFFICIENT_BALANCE = "insufficient_balance"
    INSUFFICIENT_DEPOSIT = "insufficient_deposit"
    UNKNOWN_ACCOUNT = "unknown_account"
    NO_COMMITMENT = "no_commitment"
    DUPLICATE = "duplicate"
    STALE_NONCE = "stale_nonce"
    ROOT_MISMATCH = "root_mismatch"
    COUNT_OUT_OF_RANGE = "count_out_of_range"
    AMOUNT_MISMATCH = "amount_mismatch"
    ALREADY_REFUNDED = "already_refunded"
    ALREADY_SETTLED = "already_settled"
    HASH_NOT_PUBLISHED = "hash_not_published"
    DEADLINE_PENDING = "deadline_pending"


class SealError(Exception):
    """Base class for every error raised by the engine."""


class ParameterError(SealError, ValueError):
    """A numeric input is outside its admissible domain."""


class ConfigError(SealError):
    """Scenario configuration failed validation."""

    def __init__(self, message: str, field_paths: Optional[List[str]] = None):
        super().__init__(message)
        self.field_paths = field_paths or []


class TraceFormatError(SealError):
    """A mobility trace row could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class NoCandidateError(SealError):
    """Winner selection was asked to choose from an empty candidate set."""


class AttestationError(SealError):
    """A participant has not attested the enclave program, or attested a different one."""


class SealedDataError(SealError):
    """Authenticated decryption failed."""


class ReportFormatError(SealError):
    """A report line is not valid JSON or does not match the report schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
