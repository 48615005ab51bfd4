"""
Hashing, signing and sealing primitives used by the exchange protocol.

Everything else in the protocol goes through these helpers, so the concrete
algorithms (Keccak-256, Ed25519, AES-GCM, X25519 sealed boxes) can change
without touching protocol logic.
"""

import json
import logging
from typing import Any, Optional

import numpy as np
from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from nacl.exceptions import CryptoError
from nacl.public import PrivateKey, PublicKey, SealedBox
from pydantic import BaseModel, Field
from web3 import Web3

from app.errors import SealedDataError

logger = logging.getLogger(__name__)

DIGEST_SIZE = 32
CURRENCY_SCALE = 1_000_000  # ledger amounts are integer micro-units


def keccak256(*parts: bytes) -> bytes:
    return bytes(Web3.keccak(b"".join(parts)))


def encode_amount(units: int) -> bytes:
    """32-byte big-endian encoding of a non-negative currency amount."""
    return int(units).to_bytes(DIGEST_SIZE, "big")


def encode_nonce(nonce: int) -> bytes:
    return int(nonce).to_bytes(DIGEST_SIZE, "big")


def to_units(amount: float) -> int:
    return int(round(amount * CURRENCY_SCALE))


def from_units(units: int) -> float:
    return units / CURRENCY_SCALE


def canonical_json(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def random_bytes(rng: np.random.Generator, size: int = DIGEST_SIZE) -> bytes:
    return rng.bytes(size)


class SigningIdentity:
    """An Ed25519 key pair with hex-encoded public key."""

    def __init__(self, private_key: Ed25519PrivateKey):
        self._private_key = private_key
        raw = private_key.public_key().public_bytes(
            encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw
        )
        self.public_hex = raw.hex()

    @classmethod
    def generate(cls, rng: np.random.Generator) -> "SigningIdentity":
        return cls(Ed25519PrivateKey.from_private_bytes(random_bytes(rng)))

    def sign(self, message: bytes) -> str:
        return self._private_key.sign(keccak256(message)).hex()


def verify_signature(public_hex: str, signature_hex: str, message: bytes) -> bool:
    try:
        key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        key.verify(bytes.fromhex(signature_hex), keccak256(message))
        return True
    except (InvalidSignature, ValueError):
        return False


class Certificate(BaseModel):
    pk: str
    issued_at: float
    expires_at: float
    signature: str = Field(description="Authority signature over pk, issue and expiry times")

    def body(self) -> bytes:
        return canonical_json({"pk": self.pk, "issued_at": self.issued_at, "expires_at": self.expires_at})


class CertificateAuthority:
    """Issues time-bounded certificates binding account public keys."""

    def __init__(self, identity: SigningIdentity):
        self.identity = identity

    def issue(self, public_hex: str, now: float, ttl: float) -> Certificate:
        certificate = Certificate(pk=public_hex, issued_at=now, expires_at=now + ttl, signature="")
        certificate.signature = self.identity.sign(certificate.body())
        return certificate

    def verify(self, certificate: Optional[Certificate], now: float) -> bool:
        if certificate is None:
            return False
        if not verify_signature(self.identity.public_hex, certificate.signature, certificate.body()):
            return False
        return certificate.issued_at <= now <= certificate.expires_at


def symmetric_encrypt(key: bytes, plaintext: bytes, nonce: bytes) -> bytes:
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def symmetric_decrypt(key: bytes, blob: bytes) -> bytes:
    try:
        return AESGCM(key).decrypt(blob[:12], blob[12:], None)
    except (InvalidTag, ValueError) as e:
        raise SealedDataError("symmetric decryption failed") from e


class BoxKeyPair:
    """Public-key encryption key pair; ciphertexts are authenticated sealed boxes."""

    def __init__(self, private_key: PrivateKey):
        self._private_key = private_key
        self.public_key: PublicKey = private_key.public_key

    @classmethod
    def generate(cls, rng: np.random.Generator) -> "BoxKeyPair":
        return cls(PrivateKey(random_bytes(rng)))

    def open(self, blob: bytes) -> bytes:
        try:
            return SealedBox(self._private_key).decrypt(blob)
        except CryptoError as e:
            raise SealedDataError("sealed box authentication failed") from e


def seal_to(public_key: PublicKey, plaintext: bytes) -> bytes:
    return SealedBox(public_key).encrypt(plaintext)
