from .accounting import delta_rate, key_rate_report, preshared_pairs_required
from .config import ProtocolConfig
from .link import ClassicalChannel, Link, RoundOutcome, bootstrap_pki, run_round
from .modes import AuthMode, Phase, Stage, Variant, auth_mode
from .party import Party
from .pool import KeyPool, KeyReuseError
from .session import Session, final_key_slice_verify
from .transcript import A_TO_B, B_TO_A, AuthEnvelope, TranscriptRecord

__all__ = [
    "A_TO_B", "B_TO_A", "AuthEnvelope", "AuthMode", "ClassicalChannel", "KeyPool",
    "KeyReuseError", "Link", "Party", "Phase", "ProtocolConfig", "RoundOutcome", "Session",
    "Stage", "TranscriptRecord", "Variant", "auth_mode", "bootstrap_pki", "delta_rate",
    "final_key_slice_verify", "key_rate_report", "preshared_pairs_required", "run_round",
]
