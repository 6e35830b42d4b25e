"""Detached Ed25519 signatures for center finalization records.

Keys travel as lowercase hex of the raw 32-byte values; signatures as
lowercase hex of the raw 64 bytes. Ed25519 signing is deterministic, which
is what makes re-finalization emit a bit-identical record.
"""

from __future__ import annotations

import re

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

_HEX32 = re.compile(r"^[0-9a-f]{64}$")
_HEX64 = re.compile(r"^[0-9a-f]{128}$")


def generate_keypair(seed: bytes | None = None) -> tuple[str, str]:
    """Return (private_hex, public_hex); a 32-byte seed pins the key."""
    if seed is None:
        private = ed25519.Ed25519PrivateKey.generate()
    else:
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        private = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
    public = private.public_key()
    return (
        private.private_bytes_raw().hex(),
        public.public_bytes_raw().hex(),
    )


def sign(private_hex: str, message: bytes) -> str:
    if not _HEX32.fullmatch(private_hex):
        raise ValueError("private key must be 64 lowercase hex chars")
    key = ed25519.Ed25519PrivateKey.from_private_bytes(bytes.fromhex(private_hex))
    return key.sign(message).hex()


def verify(public_hex: str, message: bytes, signature_hex: str) -> bool:
    """True iff the signature is well-formed and valid for this key/message."""
    if not _HEX32.fullmatch(public_hex) or not _HEX64.fullmatch(signature_hex):
        return False
    try:
        key = ed25519.Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        key.verify(bytes.fromhex(signature_hex), message)
    except (InvalidSignature, ValueError):
        return False
    return True
