"""Key-rate and network accounting."""

from __future__ import annotations

from fractions import Fraction

# Digests that would need symmetric key if basis sifting (two-way) and the
# random-number transfer (one-way) were not signed with PQC.
SIFT_AND_RAND_DIGESTS = 3


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else float(x)


def delta_rate(digest_bits: int, round_seconds) -> Fraction:
    """Rate lost if one n-bit digest per round were paid for with key: n / T."""
    t = Fraction(str(round_seconds))
    if t <= 0:
        raise ValueError("round duration must be positive")
    return Fraction(digest_bits) / t


def key_rate_report(history: list[dict], round_seconds, digest_bits: int = 256) -> dict:
    if not history:
        raise ValueError("need at least one completed round")
    t = Fraction(str(round_seconds))
    rounds = len(history)
    net = sum(h["stored_bits"] for h in history)
    consumed: dict[str, int] = {}
    for h in history:
        for phase, n in h.get("consumed_by_phase", {}).items():
            consumed[phase] = consumed.get(phase, 0) + n
    dr = delta_rate(digest_bits, t)
    return {
        "rounds": rounds,
        "successful_rounds": sum(h["status"] == "Success" for h in history),
        "aborted_rounds": sum(h["status"] != "Success" for h in history),
        "round_seconds": _num(t),
        "generated_bits": sum(h["generated_bits"] for h in history),
        "net_key_bits": net,
        "net_key_rate_bps": _num(Fraction(net) / (rounds * t)),
        "consumed_auth_bits": sum(h["consumed_auth_bits"] for h in history),
        "consumed_by_phase": consumed,
        "discarded_bits": sum(h["discarded_bits"] for h in history),
        "digest_bits": digest_bits,
        "delta_r_bps": _num(dr),
        "delta_r_all_sift_rand_digests_bps": _num(dr * SIFT_AND_RAND_DIGESTS),
    }


def preshared_pairs_required(user_count: int) -> int:
    """Pairwise pre-shared keys for a fully connected network of ``user_count`` users."""
    if user_count < 2:
        raise ValueError("need at least two users")
    return user_count * (user_count - 1) // 2
