from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..crypto import (HASHPAD, LAMPORT_MERKLE, Certificate, CertificateAuthority,
                      EncryptionKeyPair, SignatureKeyPair, pke_keygen, sig_keygen)


@dataclass
class Party:
    """A network node: long-term PQC key pairs plus its CA-issued certificate."""

    name: str
    sig: SignatureKeyPair
    enc: EncryptionKeyPair
    certificate: Certificate

    @classmethod
    def create(cls, name: str, ca: CertificateAuthority, rng: np.random.Generator,
               sig_height: int = 8, sig_scheme: str = LAMPORT_MERKLE,
               enc_scheme: str = HASHPAD) -> Party:
        sig = sig_keygen(sig_scheme, rng, height=sig_height)
        enc = pke_keygen(enc_scheme, rng)
        return cls(name, sig, enc, ca.issue(name, sig.public, enc.public))
