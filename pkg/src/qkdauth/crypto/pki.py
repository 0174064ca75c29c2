"""Certificate authority and certificates binding a party to its public keys."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bits import BitString
from .encoding import DecodeError, pack_fields, unpack_fields
from .hashing import hash_digest
from .signatures import LAMPORT_MERKLE, SignatureKeyPair, sig_keygen, sign, verify

_CERT_TAG = b"qkdauth-cert-v1"


@dataclass(frozen=True)
class Certificate:
    subject_id: str
    sig_public: bytes
    enc_public: bytes
    ca_signature: bytes

    def body(self) -> bytes:
        return pack_fields(_CERT_TAG, self.subject_id.encode(), self.sig_public, self.enc_public)

    def to_bytes(self) -> bytes:
        return pack_fields(self.body(), self.ca_signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> Certificate:
        body, sig = unpack_fields(data, 2)
        tag, subject, sig_pub, enc_pub = unpack_fields(body, 4)
        if tag != _CERT_TAG:
            raise DecodeError("not a certificate")
        try:
            subject_id = subject.decode()
        except UnicodeDecodeError as exc:
            raise DecodeError("subject id is not utf-8") from exc
        return cls(subject_id, sig_pub, enc_pub, sig)


def _body_digest(subject_id: str, sig_public: bytes, enc_public: bytes) -> BitString:
    return hash_digest(pack_fields(_CERT_TAG, subject_id.encode(), sig_public, enc_public))


def issue_certificate(ca_private: SignatureKeyPair, subject_id: str,
                      subject_keys: tuple[bytes, bytes]) -> Certificate:
    sig_public, enc_public = subject_keys
    tag = sign(ca_private, _body_digest(subject_id, sig_public, enc_public))
    return Certificate(subject_id, sig_public, enc_public, tag)


def verify_certificate(ca_public: bytes, cert: Certificate | bytes) -> bool:
    if isinstance(cert, (bytes, bytearray)):
        try:
            cert = Certificate.from_bytes(bytes(cert))
        except DecodeError:
            return False
    digest = _body_digest(cert.subject_id, cert.sig_public, cert.enc_public)
    return verify(ca_public, digest, cert.ca_signature)


class CertificateAuthority:
    def __init__(self, name: str, rng: np.random.Generator, height: int = 6,
                 scheme_id: str = LAMPORT_MERKLE):
        self.name = name
        self.keypair = sig_keygen(scheme_id, rng, height=height)

    @property
    def public(self) -> bytes:
        return self.keypair.public

    def issue(self, subject_id: str, sig_public: bytes, enc_public: bytes) -> Certificate:
        return issue_certificate(self.keypair, subject_id, (sig_public, enc_public))
