"""Round driver, certificate bootstrap and the per-link multi-round runner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..crypto import CertificateAuthority
from ..crypto.encoding import pack_fields, pack_u32
from ..errors import ProtocolAbort
from ..postprocessing import correct_errors
from ..randomness import public_coin, stream
from .config import ProtocolConfig
from .modes import AuthMode, Phase, Stage
from .party import Party
from .session import Session
from .transcript import A_TO_B, B_TO_A, AuthEnvelope, TranscriptRecord

SIGNATURES_PER_ROUND = 4


class ClassicalChannel:
    """Ordered, reliable duplex channel that records everything it carries.

    ``adversary`` may implement any of ``on_envelope(round, env)``,
    ``on_plain(round, stage, direction, message)``, ``on_pulses(pulses)`` and
    ``on_message(record)``; each hook sees (and may replace) traffic in flight.
    """

    def __init__(self, adversary=None):
        self.adversary = adversary
        self.records: list[TranscriptRecord] = []

    def _hook(self, name):
        return getattr(self.adversary, name, None) if self.adversary is not None else None

    def _log(self, rec: TranscriptRecord) -> None:
        self.records.append(rec)
        hook = self._hook("on_message")
        if hook:
            hook(rec)

    def pulses(self, pulses):
        hook = self._hook("on_pulses")
        return hook(pulses) if hook else pulses

    def plain(self, round_index: int, stage: str, direction: str, message: bytes, receive):
        hook = self._hook("on_plain")
        if hook:
            message = hook(round_index, stage, direction, message)
        env = AuthEnvelope(stage, direction, message, AuthMode.NONE)
        self._log(TranscriptRecord.of(round_index, env))
        return receive(message)

    def deliver(self, round_index: int, env: AuthEnvelope, receive):
        hook = self._hook("on_envelope")
        if hook:
            env = hook(round_index, env)
        rec = TranscriptRecord.of(round_index, env)
        self._log(rec)
        try:
            result = receive(env)
        except ProtocolAbort:
            rec.verdict = "fail"
            raise
        rec.verdict = "pass"
        return result


@dataclass
class RoundOutcome:
    round: int
    chain_round: int
    status: str
    stage: str | None = None
    reason: str | None = None
    net_key_bits: int = 0
    transcript: list[TranscriptRecord] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "Success"


def bootstrap_pki(alice: Session, bob: Session, channel: ClassicalChannel) -> None:
    """Exchange and verify certificates in both directions; raises on failure."""
    channel.plain(0, Stage.BOOTSTRAP, A_TO_B, alice.certificate_message(), bob.accept_certificate)
    channel.plain(0, Stage.BOOTSTRAP, B_TO_A, bob.certificate_message(), alice.accept_certificate)


def _two_way(channel, r, alice, bob, phase):
    channel.deliver(r, alice.verify_envelope(phase), bob.accept_verify)
    channel.deliver(r, bob.verify_envelope(phase), alice.accept_verify)


def run_round(alice: Session, bob: Session, channel: ClassicalChannel, round_index: int,
              chain_round: int) -> RoundOutcome:
    """Run one full post-processing round between ``alice`` (A) and ``bob`` (B)."""
    cfg = alice.config
    start = len(channel.records)
    r = round_index
    try:
        alice.begin_round(r, chain_round)
        bob.begin_round(r, chain_round)

        pulses = channel.pulses(alice.prepare())
        channel.plain(r, Stage.DETECTION, B_TO_A, bob.measure(pulses), alice.receive_positions)

        channel.deliver(r, bob.basis_envelope(), alice.accept_basis)
        channel.deliver(r, alice.basis_envelope(), bob.accept_basis)
        alice.finish_sift()
        bob.finish_sift()

        channel.plain(r, Stage.QBER, B_TO_A, bob.qber_sample_message(), alice.accept_qber_sample)
        channel.plain(r, Stage.QBER, A_TO_B, alice.qber_sample_message(), bob.accept_qber_sample)

        ca, cb = correct_errors(alice.st.remaining, bob.st.remaining, alice.st.qber.rate,
                                public_coin(alice.st.nonce + b"cascade"), cfg.cascade_passes)
        channel.plain(r, "ErrorCorrection", A_TO_B,
                      pack_fields(b"parities", pack_u32(ca.ec_leak_bits)), lambda _: None)
        alice.set_corrected(ca)
        bob.set_corrected(cb)

        _two_way(channel, r, alice, bob, Phase.EC_VERIFY)

        alice.plan_lengths()
        bob.plan_lengths()
        channel.deliver(r, alice.rand_envelope(), bob.accept_rand)
        alice.amplify()
        bob.amplify()

        _two_way(channel, r, alice, bob, Phase.FINAL_VERIFY)
        alice.second_amplify()
        bob.second_amplify()

        alice.check_commit()
        bob.check_commit()
        net = alice.commit()
        bob.commit()
        return RoundOutcome(r, chain_round, "Success", net_key_bits=net,
                            transcript=channel.records[start:])
    except ProtocolAbort as exc:
        alice.abort(exc.stage, exc.reason)
        bob.abort(exc.stage, exc.reason)
        return RoundOutcome(r, chain_round, "Abort", exc.stage, exc.reason,
                            transcript=channel.records[start:])


def signature_height(rounds: int) -> int:
    return max(2, math.ceil(math.log2(SIGNATURES_PER_ROUND * max(rounds, 1) + 1)))


class Link:
    """Alice-Bob link state across rounds.

    After a successful round the chain position advances; an aborted round
    breaks the chain, so the next round starts again in chain position 1 and
    authenticates its verification phases with PQC.
    """

    def __init__(self, alice: Session, bob: Session, adversary=None):
        self.alice = alice
        self.bob = bob
        self.channel = ClassicalChannel(adversary)
        self.round_index = 0
        self.chain_round = 1
        self.outcomes: list[RoundOutcome] = []
        self.bootstrapped = False

    @classmethod
    def create(cls, config: ProtocolConfig, seed: int, rounds: int = 10, adversary=None,
               names: tuple[str, str] = ("alice", "bob")) -> Link:
        ca = CertificateAuthority("ca", stream(seed, "ca:keygen"), height=2)
        height = signature_height(rounds)
        a_name, b_name = names
        alice_party = Party.create(a_name, ca, stream(seed, f"{a_name}:keygen"), height)
        bob_party = Party.create(b_name, ca, stream(seed, f"{b_name}:keygen"), height)
        alice = Session(alice_party, "A", b_name, ca.public, config, seed)
        bob = Session(bob_party, "B", a_name, ca.public, config, seed)
        return cls(alice, bob, adversary)

    @property
    def transcript(self) -> list[TranscriptRecord]:
        return self.channel.records

    def bootstrap(self) -> RoundOutcome | None:
        try:
            bootstrap_pki(self.alice, self.bob, self.channel)
        except ProtocolAbort as exc:
            return RoundOutcome(0, 0, "Abort", exc.stage, exc.reason,
                                transcript=list(self.channel.records))
        self.bootstrapped = True
        return None

    def run_round(self) -> RoundOutcome:
        if not self.bootstrapped:
            failed = self.bootstrap()
            if failed is not None:
                return failed
        self.round_index += 1
        out = run_round(self.alice, self.bob, self.channel, self.round_index, self.chain_round)
        self.chain_round = self.chain_round + 1 if out.success else 1
        self.outcomes.append(out)
        return out

    def run(self, rounds: int) -> list[RoundOutcome]:
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        for _ in range(rounds):
            out = self.run_round()
            if out.round == 0:
                self.outcomes.append(out)
                break
        return self.outcomes
