from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from ..crypto import EncryptionKeyPair
from ..engine.config import ProtocolConfig
from ..engine.link import ClassicalChannel, RoundOutcome, bootstrap_pki, run_round
from ..engine.modes import AuthMode, Stage
from ..engine.party import Party
from ..engine.session import Session
from ..engine.transcript import A_TO_B, B_TO_A, AuthEnvelope, TranscriptRecord
from ..postprocessing import decode_basis_message


class Recorder:
    """Record-only adversary: keeps a copy of every record, changes nothing."""

    def __init__(self):
        self.records: list[TranscriptRecord] = []

    def on_message(self, record: TranscriptRecord) -> None:
        self.records.append(record)


@dataclass(frozen=True)
class InsiderKeys:
    """What a former legitimate participant kept from the recorded round."""

    name: str
    role: str
    enc: EncryptionKeyPair
    corrected: BitString | None
    final: BitString | None


@dataclass(frozen=True)
class RecordedSession:
    round_index: int
    variant: str
    outcome_status: str
    envelopes: dict = field(repr=False)
    certificates: dict = field(repr=False)
    nonce: bytes = b""
    insiders: dict = field(default_factory=dict, repr=False)

    def envelope(self, phase: str, direction: str) -> AuthEnvelope | None:
        return self.envelopes.get((phase, direction))

    def basis(self, direction: str) -> tuple[np.ndarray, np.ndarray]:
        return decode_basis_message(self.envelopes[(Stage.BASIS_SIFT, direction)].message)

    def positions(self) -> np.ndarray:
        return self.basis(B_TO_A)[0]


def record_session(alice: Party, bob: Party, ca_public: bytes, config: ProtocolConfig,
                   seed: int, round_index: int = 1, chain_round: int = 1) -> RecordedSession:
    """Run one legitimate round between ``alice`` and ``bob`` under a passive tap."""
    tap = Recorder()
    channel = ClassicalChannel(tap)
    a = Session(alice, "A", bob.name, ca_public, config, seed)
    b = Session(bob, "B", alice.name, ca_public, config, seed)
    bootstrap_pki(a, b, channel)
    out: RoundOutcome = run_round(a, b, channel, round_index, chain_round)
    envelopes, certificates = {}, {}
    for rec in tap.records:
        env = rec.envelope
        if env.auth_mode is AuthMode.NONE:
            if env.phase == Stage.BOOTSTRAP:
                name = alice.name if env.direction == A_TO_B else bob.name
                certificates[name] = env.message
            continue
        envelopes[(env.phase, env.direction)] = env
    insiders = {}
    for party, sess in ((alice, a), (bob, b)):
        st = sess.last
        insiders[party.name] = InsiderKeys(
            party.name, sess.role, party.enc,
            st.corrected.bits if st is not None and st.corrected is not None else None,
            st.final.bits if st is not None and st.final is not None else None)
    nonce = a.last.nonce if a.last is not None else b""
    return RecordedSession(round_index, config.variant.value, out.status, envelopes,
                           certificates, nonce, insiders)
