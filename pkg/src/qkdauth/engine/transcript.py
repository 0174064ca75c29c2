"""Authenticated envelopes and the JSON Lines transcript."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from ..bits import BitString
from ..crypto.encoding import pack_bits, pack_fields
from .modes import AuthMode

A_TO_B = "A->B"
B_TO_A = "B->A"


def reverse(direction: str) -> str:
    return B_TO_A if direction == A_TO_B else A_TO_B


@dataclass(frozen=True)
class AuthEnvelope:
    phase: str
    direction: str
    message: bytes
    auth_mode: AuthMode
    signature: bytes = b""
    ciphertext: bytes = b""
    otp_tag: BitString | None = None

    def auth_material(self) -> bytes:
        if self.auth_mode is AuthMode.NONE:
            return b""
        tag = pack_bits(self.otp_tag) if self.otp_tag is not None else b""
        return pack_fields(self.signature, self.ciphertext, tag)

    def replace(self, **changes) -> AuthEnvelope:
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return AuthEnvelope(**data)


@dataclass
class TranscriptRecord:
    round: int
    phase: str
    direction: str
    auth_mode: str
    message_hash: str
    auth_material_hex: str
    verdict: str = "n/a"
    envelope: AuthEnvelope | None = field(default=None, repr=False, compare=False)

    @classmethod
    def of(cls, round_index: int, env: AuthEnvelope) -> TranscriptRecord:
        return cls(round_index, env.phase, env.direction, env.auth_mode.value,
                   hashlib.sha256(env.message).hexdigest(), env.auth_material().hex(),
                   envelope=env)

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "phase": self.phase,
            "direction": self.direction,
            "auth_mode": self.auth_mode,
            "message_hash": self.message_hash,
            "auth_material_hex": self.auth_material_hex,
            "verdict": self.verdict,
        }


def write_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=False) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
