"""Pluggable signature schemes.

The reference scheme is a Merkle tree of Lamport one-time keys over SHA-256.
Each leaf signs exactly once; the signing key tracks the next unused leaf and
refuses to sign when the tree is exhausted. Real post-quantum schemes can be
registered under another ``scheme_id`` as long as they provide the same three
calls.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from .encoding import DecodeError, pack_bits, pack_fields, pack_u32, unpack_fields, unpack_u32

LAMPORT_MERKLE = "lamport-merkle-sha256"
_N = 32          # hash output bytes
_BITS = 256      # signed bits per leaf
_MAX_HEIGHT = 20


class UnknownScheme(KeyError):
    pass


class SignatureKeyExhausted(RuntimeError):
    pass


def _h(*parts: bytes) -> bytes:
    return hashlib.sha256(b"".join(parts)).digest()


@dataclass
class LamportMerkleSigningKey:
    seed: bytes
    height: int
    levels: list[list[bytes]] = field(repr=False)
    next_index: int = 0

    @property
    def capacity(self) -> int:
        return 1 << self.height

    @property
    def remaining(self) -> int:
        return self.capacity - self.next_index


@dataclass(frozen=True)
class SignatureKeyPair:
    private: object
    public: bytes
    scheme_id: str


def _leaf_secrets(seed: bytes, index: int) -> list[bytes]:
    blob = hashlib.shake_256(b"lamport-sk" + seed + pack_u32(index)).digest(2 * _BITS * _N)
    return [blob[i:i + _N] for i in range(0, len(blob), _N)]


def _leaf_from_pubs(pubs: list[bytes]) -> bytes:
    return _h(b"\x00leaf", *pubs)


def _node(left: bytes, right: bytes) -> bytes:
    return _h(b"\x01node", left, right)


def _message_bits(digest: BitString) -> np.ndarray:
    return np.unpackbits(np.frombuffer(_h(b"msg", pack_bits(digest)), dtype=np.uint8))


class LamportMerkle:
    scheme_id = LAMPORT_MERKLE

    @staticmethod
    def keygen(rng: np.random.Generator, height: int = 8) -> SignatureKeyPair:
        if not 0 <= height <= _MAX_HEIGHT:
            raise ValueError(f"tree height must be in [0, {_MAX_HEIGHT}]")
        seed = rng.bytes(_N)
        leaves = []
        for idx in range(1 << height):
            leaves.append(_leaf_from_pubs([_h(s) for s in _leaf_secrets(seed, idx)]))
        levels = [leaves]
        while len(levels[-1]) > 1:
            prev = levels[-1]
            levels.append([_node(prev[i], prev[i + 1]) for i in range(0, len(prev), 2)])
        root = levels[-1][0]
        sk = LamportMerkleSigningKey(seed=seed, height=height, levels=levels)
        public = pack_fields(LAMPORT_MERKLE.encode(), pack_u32(height), root)
        return SignatureKeyPair(private=sk, public=public, scheme_id=LAMPORT_MERKLE)

    @staticmethod
    def sign(private: LamportMerkleSigningKey, digest: BitString) -> bytes:
        if private.next_index >= private.capacity:
            raise SignatureKeyExhausted(f"all {private.capacity} one-time leaves used")
        idx = private.next_index
        private.next_index += 1
        secrets = _leaf_secrets(private.seed, idx)
        revealed, others = [], []
        for i, b in enumerate(_message_bits(digest)):
            b = int(b)
            revealed.append(secrets[2 * i + b])
            others.append(_h(secrets[2 * i + 1 - b]))
        path = []
        pos = idx
        for level in private.levels[:-1]:
            path.append(level[pos ^ 1])
            pos >>= 1
        return pack_fields(pack_u32(idx), b"".join(revealed), b"".join(others), b"".join(path))

    @staticmethod
    def verify(public: bytes, digest: BitString, tag: bytes) -> bool:
        try:
            scheme, height_raw, root = unpack_fields(public, 3)
            if scheme != LAMPORT_MERKLE.encode() or len(root) != _N:
                return False
            height = unpack_u32(height_raw)
            idx_raw, revealed, others, path = unpack_fields(tag, 4)
            idx = unpack_u32(idx_raw)
        except DecodeError:
            return False
        if height > _MAX_HEIGHT or idx >= (1 << height):
            return False
        if len(revealed) != _BITS * _N or len(others) != _BITS * _N or len(path) != height * _N:
            return False
        pubs = []
        for i, b in enumerate(_message_bits(digest)):
            got = _h(revealed[i * _N:(i + 1) * _N])
            other = others[i * _N:(i + 1) * _N]
            pubs.extend((got, other) if b == 0 else (other, got))
        node = _leaf_from_pubs(pubs)
        pos = idx
        for lvl in range(height):
            sib = path[lvl * _N:(lvl + 1) * _N]
            node = _node(node, sib) if pos % 2 == 0 else _node(sib, node)
            pos >>= 1
        return node == root


SCHEMES = {LAMPORT_MERKLE: LamportMerkle}


def get_scheme(scheme_id: str):
    try:
        return SCHEMES[scheme_id]
    except KeyError:
        raise UnknownScheme(f"unknown signature scheme {scheme_id!r}") from None


def sig_keygen(scheme_id: str, rng: np.random.Generator, **params) -> SignatureKeyPair:
    return get_scheme(scheme_id).keygen(rng, **params)


def sign(keypair_or_private, digest: BitString, scheme_id: str = LAMPORT_MERKLE) -> bytes:
    if isinstance(keypair_or_private, SignatureKeyPair):
        return get_scheme(keypair_or_private.scheme_id).sign(keypair_or_private.private, digest)
    return get_scheme(scheme_id).sign(keypair_or_private, digest)


def scheme_of_public(public: bytes) -> str | None:
    try:
        return unpack_fields(public)[0].decode()
    except (DecodeError, IndexError, UnicodeDecodeError):
        return None


def verify(public: bytes, digest: BitString, tag: bytes) -> bool:
    """Never raises on malformed input; anything unparseable is rejected."""
    scheme_id = scheme_of_public(public)
    if scheme_id not in SCHEMES:
        return False
    return SCHEMES[scheme_id].verify(public, digest, tag)
