"""Public-key encryption interface and an INSECURE reference stand-in.

``hashpad-insecure`` derives a pad from ``SHAKE-256(nonce || recipient public
value)`` and XORs it onto the plaintext. Anyone holding the public key can
decrypt, so it provides no confidentiality at all. It exists only so the
protocol structure (who encrypts to whom, what gets decrypted where) can be
exercised end to end; a real KEM-based scheme plugs in under its own id.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from ..bits import BitString
from .encoding import DecodeError, pack_bits, pack_fields, unpack_bits, unpack_fields

HASHPAD = "hashpad-insecure"
PLAINTEXT_CAPACITY_BITS = 8192


class DecryptionError(ValueError):
    pass


@dataclass(frozen=True)
class EncryptionKeyPair:
    private: bytes
    public: bytes
    scheme_id: str


def _public_value(private: bytes) -> bytes:
    return hashlib.sha256(b"hashpad-pk" + private).digest()


def _pad(nonce: bytes, public_value: bytes, nbits: int) -> BitString:
    raw = hashlib.shake_256(b"hashpad" + nonce + public_value).digest((nbits + 7) // 8)
    return BitString.from_bytes(raw, nbits)


class HashPad:
    scheme_id = HASHPAD

    @staticmethod
    def keygen(rng: np.random.Generator) -> EncryptionKeyPair:
        private = rng.bytes(32)
        public = pack_fields(HASHPAD.encode(), _public_value(private))
        return EncryptionKeyPair(private=private, public=public, scheme_id=HASHPAD)

    @staticmethod
    def encrypt(public: bytes, message: BitString, rng: np.random.Generator | None = None) -> bytes:
        if len(message) > PLAINTEXT_CAPACITY_BITS:
            raise ValueError(f"plaintext exceeds {PLAINTEXT_CAPACITY_BITS} bits")
        scheme, value = unpack_fields(public, 2)
        if scheme != HASHPAD.encode():
            raise ValueError("public key is not a hashpad key")
        nonce = rng.bytes(32) if rng is not None else os.urandom(32)
        body = message ^ _pad(nonce, value, len(message))
        return pack_fields(HASHPAD.encode(), nonce, pack_bits(body))

    @staticmethod
    def decrypt(private: bytes, ciphertext: bytes) -> BitString:
        try:
            scheme, nonce, body_raw = unpack_fields(ciphertext, 3)
            body = unpack_bits(body_raw)
        except DecodeError as exc:
            raise DecryptionError(str(exc)) from exc
        if scheme != HASHPAD.encode():
            raise DecryptionError("ciphertext is not a hashpad ciphertext")
        return body ^ _pad(nonce, _public_value(private), len(body))


SCHEMES = {HASHPAD: HashPad}


def pke_keygen(scheme_id: str, rng: np.random.Generator) -> EncryptionKeyPair:
    if scheme_id not in SCHEMES:
        raise KeyError(f"unknown encryption scheme {scheme_id!r}")
    return SCHEMES[scheme_id].keygen(rng)


def pke_encrypt(public: bytes, message: BitString, rng: np.random.Generator | None = None) -> bytes:
    scheme = unpack_fields(public)[0].decode()
    return SCHEMES[scheme].encrypt(public, message, rng)


def pke_decrypt(private, ciphertext: bytes, scheme_id: str = HASHPAD) -> BitString:
    """``private`` is either an ``EncryptionKeyPair`` or the raw private key."""
    if isinstance(private, EncryptionKeyPair):
        scheme_id, private = private.scheme_id, private.private
    return SCHEMES[scheme_id].decrypt(private, ciphertext)
