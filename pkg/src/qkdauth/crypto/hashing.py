from __future__ import annotations

import hashlib

from ..bits import BitString

DEFAULT_DIGEST_BITS = 256


def hash_digest(message: bytes, digest_bits: int = DEFAULT_DIGEST_BITS) -> BitString:
    """Fixed-length message digest.

    256 bits is plain SHA-256. Other lengths (multiples of 8) use SHAKE-256 so
    the digest length stays configurable.
    """
    if digest_bits <= 0 or digest_bits % 8:
        raise ValueError(f"digest length must be a positive multiple of 8, got {digest_bits}")
    if digest_bits == 256:
        raw = hashlib.sha256(message).digest()
    else:
        raw = hashlib.shake_256(message).digest(digest_bits // 8)
    return BitString.from_bytes(raw)


def otp_encrypt(key: BitString, plaintext: BitString) -> BitString:
    """One-time pad. The same call decrypts."""
    if len(key) != len(plaintext):
        raise ValueError(
            f"one-time pad key has {len(key)} bits but plaintext has {len(plaintext)}; "
            "authentication key budget is wrong"
        )
    return key ^ plaintext


otp_decrypt = otp_encrypt
