from __future__ import annotations

from enum import Enum


class Phase(str, Enum):
    BASIS_SIFT = "BasisSift"
    EC_VERIFY = "ECVerify"
    RAND_TRANSFER = "RandTransfer"
    FINAL_VERIFY = "FinalVerify"


PHASE_ORDER = (Phase.BASIS_SIFT, Phase.EC_VERIFY, Phase.RAND_TRANSFER, Phase.FINAL_VERIFY)


class AuthMode(str, Enum):
    PQC_SIGN_ONLY = "PqcSignOnly"
    PQC_SIGN_ENCRYPT = "PqcSignEncrypt"
    OTP_DIGEST = "OtpDigest"
    FINAL_KEY_SLICE = "FinalKeySlice"
    NONE = "None"


class Variant(str, Enum):
    P1 = "P1"
    P2 = "P2"


# Abort stages: the four authenticated phases plus the unauthenticated steps.
class Stage:
    BOOTSTRAP = "Bootstrap"
    DETECTION = "Detection"
    BASIS_SIFT = Phase.BASIS_SIFT.value
    QBER = "QBER"
    EC_VERIFY = Phase.EC_VERIFY.value
    RAND_TRANSFER = Phase.RAND_TRANSFER.value
    PRIVACY_AMP = "PrivacyAmp"
    FINAL_VERIFY = Phase.FINAL_VERIFY.value
    KEY_BUDGET = "KeyBudget"


def auth_mode(variant: Variant | str, round_index: int, phase: Phase | str) -> AuthMode:
    """Authentication mode for a phase, by protocol variant and chain round."""
    variant, phase = Variant(variant), Phase(phase)
    if round_index < 1:
        raise ValueError("round_index starts at 1")
    if variant is Variant.P1:
        if phase in (Phase.BASIS_SIFT, Phase.RAND_TRANSFER):
            return AuthMode.PQC_SIGN_ONLY
        return AuthMode.PQC_SIGN_ENCRYPT if round_index == 1 else AuthMode.OTP_DIGEST
    if phase is Phase.FINAL_VERIFY:
        return AuthMode.FINAL_KEY_SLICE
    return AuthMode.PQC_SIGN_ONLY
