"""Sifting, QBER estimation, reconciliation, verification digests and
privacy amplification with explicit leakage accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bits import BitString
from .cascade import cascade
from .channel import Detections, Pulses
from .crypto.encoding import DecodeError, pack_bits, pack_fields, unpack_bits, unpack_fields
from .crypto.hashing import DEFAULT_DIGEST_BITS, hash_digest
from .crypto.toeplitz import ToeplitzSeed, toeplitz_hash
from .errors import InsufficientKey, ProtocolAbort


@dataclass(frozen=True)
class SiftedKey:
    bits: BitString
    positions: np.ndarray

    def __post_init__(self):
        if len(self.bits) != len(self.positions):
            raise ValueError("bits and positions differ in length")
        if len(self.positions) > 1 and not np.all(np.diff(self.positions) > 0):
            raise ValueError("positions must be strictly increasing")


@dataclass(frozen=True)
class QberEstimate:
    sampled_positions: np.ndarray
    errors: int
    rate: float
    threshold: float

    @property
    def abort(self) -> bool:
        return self.rate > self.threshold


@dataclass(frozen=True)
class CorrectedKey:
    bits: BitString
    ec_leak_bits: int = 0

    @property
    def k(self) -> int:
        return len(self.bits)


@dataclass
class LeakageLedger:
    ec_leak_bits: int = 0
    digest_leak_bits: int = 0
    margin_bits: int = 100

    def __post_init__(self):
        if min(self.ec_leak_bits, self.digest_leak_bits, self.margin_bits) < 0:
            raise ValueError("leak counts must be non-negative")

    @property
    def total(self) -> int:
        return self.ec_leak_bits + self.digest_leak_bits + self.margin_bits


@dataclass(frozen=True)
class FinalKey:
    bits: BitString
    round_index: int = 0

    @property
    def length(self) -> int:
        return len(self.bits)


# -- Step 1 / Step 2 -------------------------------------------------------

def report_valid_detections(events: Detections) -> np.ndarray:
    return np.flatnonzero(events.detected)


def encode_positions(positions: np.ndarray) -> bytes:
    return pack_fields(b"positions", np.asarray(positions, dtype=">u4").tobytes())


def decode_positions(message: bytes) -> np.ndarray:
    tag, raw = unpack_fields(message, 2)
    if tag != b"positions" or len(raw) % 4:
        raise DecodeError("not a positions message")
    return np.frombuffer(raw, dtype=">u4").astype(np.int64)


def encode_basis_message(positions: np.ndarray, bases: np.ndarray) -> bytes:
    return pack_fields(b"bases", np.asarray(positions, dtype=">u4").tobytes(),
                       pack_bits(BitString(bases)))


def decode_basis_message(message: bytes) -> tuple[np.ndarray, np.ndarray]:
    tag, pos_raw, bases_raw = unpack_fields(message, 3)
    if tag != b"bases" or len(pos_raw) % 4:
        raise DecodeError("not a basis message")
    positions = np.frombuffer(pos_raw, dtype=">u4").astype(np.int64)
    bases = unpack_bits(bases_raw).bits
    if bases.size != positions.size:
        raise DecodeError("basis count does not match position count")
    return positions, bases


def sift_local(positions: np.ndarray, own_bits: np.ndarray, own_bases: np.ndarray,
               peer_bases: np.ndarray) -> SiftedKey:
    """One party's view of sifting once both basis messages are known."""
    keep = own_bases == peer_bases
    return SiftedKey(BitString(own_bits[keep]), positions[keep])


def sift_bases(sender: Pulses, receiver: Detections):
    """Both sides of a two-way sift plus the two basis messages.

    Returns ``(sifted_a, sifted_b, (msg_b_to_a, msg_a_to_b))``.
    """
    pos = report_valid_detections(receiver)
    msg_b = encode_basis_message(pos, receiver.basis[pos])
    msg_a = encode_basis_message(pos, sender.basis[pos])
    a = sift_local(pos, sender.bit[pos], sender.basis[pos], receiver.basis[pos])
    b = sift_local(pos, receiver.bit[pos], receiver.basis[pos], sender.basis[pos])
    return a, b, (msg_b, msg_a)


def round_nonce(msg_b_to_a: bytes, msg_a_to_b: bytes) -> bytes:
    return hash_digest(pack_fields(b"round-nonce", msg_b_to_a, msg_a_to_b)).to_bytes()


# -- Step 3 ----------------------------------------------------------------

def sample_indices(n: int, fraction: float, coin: np.random.Generator) -> np.ndarray:
    if not 0 < fraction < 1:
        raise ValueError(f"sample fraction must be in (0, 1), got {fraction}")
    size = int(round(n * fraction))
    if size == 0:
        raise ProtocolAbort("QBER", "sifted key too short to sample")
    return np.sort(coin.choice(n, size=size, replace=False))


def split_sample(key: SiftedKey, sample: np.ndarray) -> tuple[np.ndarray, SiftedKey]:
    mask = np.zeros(len(key.bits), dtype=bool)
    mask[sample] = True
    bits = key.bits.bits
    return bits[mask], SiftedKey(BitString(bits[~mask]), key.positions[~mask])


def qber_from_samples(sample_a: np.ndarray, sample_b: np.ndarray, sample: np.ndarray,
                      threshold: float) -> QberEstimate:
    if sample_a.size == 0:
        raise ProtocolAbort("QBER", "empty sample")
    errors = int(np.count_nonzero(sample_a != sample_b))
    return QberEstimate(sample, errors, errors / sample_a.size, threshold)


def estimate_qber(sifted_a: SiftedKey, sifted_b: SiftedKey, sample_fraction: float,
                  threshold: float, coin: np.random.Generator):
    """Publicly compare a sample; returns ``(estimate, remaining_a, remaining_b)``."""
    sample = sample_indices(len(sifted_a.bits), sample_fraction, coin)
    sa, rest_a = split_sample(sifted_a, sample)
    sb, rest_b = split_sample(sifted_b, sample)
    return qber_from_samples(sa, sb, sample, threshold), rest_a, rest_b


# -- Step 3 (correction) ---------------------------------------------------

def correct_errors(sifted_a: SiftedKey | BitString, sifted_b: SiftedKey | BitString,
                   qber: float, coin: np.random.Generator, passes: int = 4):
    a = sifted_a.bits if isinstance(sifted_a, SiftedKey) else sifted_a
    b = sifted_b.bits if isinstance(sifted_b, SiftedKey) else sifted_b
    if len(a) != len(b):
        raise ValueError("sifted keys differ in length")
    res = cascade(a.bits, b.bits, qber, coin, passes)
    return (CorrectedKey(a, res.leak_bits), CorrectedKey(BitString(res.corrected), res.leak_bits))


# -- Steps 4 and 7 ---------------------------------------------------------

def verification_digest(key: BitString, round_nonce: bytes | BitString, label: str,
                        digest_bits: int = DEFAULT_DIGEST_BITS) -> BitString:
    if len(key) == 0:
        raise ValueError("cannot verify an empty key")
    if isinstance(round_nonce, BitString):
        round_nonce = pack_bits(round_nonce)
    return hash_digest(pack_fields(b"verify", round_nonce, label.encode(), pack_bits(key)),
                       digest_bits)


# -- Step 6 / Step 8 -------------------------------------------------------

def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log1p(-p) / math.log(2)


def compute_final_length(k: int, qber: float, ledger: LeakageLedger) -> int:
    """floor(k (1 - h2(e)) - disclosed bits - margin), clamped at zero.

    Error rates at or above one half are treated as h2 = 1 so the length
    never grows back past the maximum-entropy point. Written as
    ``k - leaks - ceil(k h2)`` so a tiny positive entropy term still costs a
    whole bit, as the exact floor requires.
    """
    h = 1.0 if qber >= 0.5 else binary_entropy(qber)
    ell = k - ledger.total - math.ceil(k * h)
    return max(0, ell)


def privacy_amplify(corrected: CorrectedKey | BitString, seed: ToeplitzSeed,
                    round_index: int = 0) -> FinalKey:
    bits = corrected.bits if isinstance(corrected, CorrectedKey) else corrected
    if seed.in_len != len(bits):
        raise ValueError(f"seed expects {seed.in_len} input bits, key has {len(bits)}")
    return FinalKey(toeplitz_hash(seed, bits), round_index)


def second_amplification_length(length: int, digest_leak: int, margin: int = 0) -> int:
    return length - digest_leak - margin


def second_amplification(final: FinalKey, seed2: ToeplitzSeed, digest_leak2: int,
                         margin: int = 0) -> FinalKey:
    out = second_amplification_length(final.length, digest_leak2, margin)
    if out <= 0:
        raise InsufficientKey("PrivacyAmp", f"second amplification leaves {out} bits")
    if seed2.out_len != out or seed2.in_len != final.length:
        raise ValueError(f"seed dimensions {seed2.in_len}x{seed2.out_len}, "
                         f"need {final.length}x{out}")
    return FinalKey(toeplitz_hash(seed2, final.bits), final.round_index)


def split_final_key(final: FinalKey | BitString, next_round_budget: int):
    """Return ``(reserved_auth_slice, stored_key)``: a prefix and the rest."""
    bits = final.bits if isinstance(final, FinalKey) else final
    if len(bits) < next_round_budget:
        raise InsufficientKey(
            "KeyBudget",
            f"final key has {len(bits)} bits, next round needs {next_round_budget}")
    return bits[:next_round_budget], bits[next_round_budget:]
