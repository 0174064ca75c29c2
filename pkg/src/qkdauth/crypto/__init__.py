from .encoding import DecodeError, pack_fields, unpack_fields
from .hashing import DEFAULT_DIGEST_BITS, hash_digest, otp_decrypt, otp_encrypt
from .pke import (HASHPAD, DecryptionError, EncryptionKeyPair, pke_decrypt, pke_encrypt,
                  pke_keygen)
from .pki import Certificate, CertificateAuthority, issue_certificate, verify_certificate
from .signatures import (LAMPORT_MERKLE, SignatureKeyExhausted, SignatureKeyPair,
                         UnknownScheme, sig_keygen, sign, verify)
from .toeplitz import ToeplitzSeed, toeplitz_hash

__all__ = [
    "DEFAULT_DIGEST_BITS", "HASHPAD", "LAMPORT_MERKLE", "Certificate", "CertificateAuthority",
    "DecodeError", "DecryptionError", "EncryptionKeyPair", "SignatureKeyExhausted",
    "SignatureKeyPair", "ToeplitzSeed", "UnknownScheme", "hash_digest", "issue_certificate",
    "otp_decrypt", "otp_encrypt", "pack_fields", "pke_decrypt", "pke_encrypt", "pke_keygen",
    "sig_keygen", "sign", "toeplitz_hash", "unpack_fields", "verify", "verify_certificate",
]
