"""Impersonating sessions that replay a recorded round.

Eve slots into the round driver in place of the party she impersonates. She
never verifies anything she receives, and every authenticated message she
sends is a replay of the recorded one. An insider who could decrypt the
recorded ciphertext re-encrypts the recovered digest to the victim, which
is the strongest thing replay alone allows.
"""

from __future__ import annotations

import numpy as np

from ..bits import BitString
from ..channel import Pulses, transmit_and_measure, vacuum_padded
from ..crypto import DecryptionError, pke_decrypt, pke_encrypt
from ..crypto.encoding import DecodeError, unpack_bits, unpack_fields
from ..crypto.pki import Certificate
from ..engine.modes import AuthMode, Phase
from ..engine.session import Session
from ..engine.transcript import AuthEnvelope
from ..errors import ProtocolAbort
from ..postprocessing import decode_basis_message, encode_positions, qber_from_samples
from .recording import InsiderKeys, RecordedSession


class _Replayer(Session):
    def __init__(self, *args, recorded: RecordedSession, impersonated: str,
                 insider: InsiderKeys | None = None, certificate: bytes | None = None,
                 **kwargs):
        super().__init__(*args, **kwargs)
        self.recorded = recorded
        self.impersonated = impersonated
        self.insider = insider
        self.certificate = certificate if certificate is not None else recorded.certificates[impersonated]

    def certificate_message(self) -> bytes:
        return self.certificate

    def accept_certificate(self, data: bytes) -> None:
        cert = Certificate.from_bytes(data)
        self.peer_sig_public, self.peer_enc_public = cert.sig_public, cert.enc_public

    def _recorded(self, phase: Phase) -> AuthEnvelope | None:
        return self.recorded.envelope(phase.value, self.own_dir)

    def _garbage(self, phase: Phase) -> AuthEnvelope:
        return AuthEnvelope(phase.value, self.own_dir, b"", self._mode(phase),
                            otp_tag=BitString.zeros(self.config.digest_bits))

    # Eve accepts whatever the victim sends.
    def accept_basis(self, env: AuthEnvelope) -> None:
        pos, bases = decode_basis_message(env.message)
        peer = np.zeros(self.st.positions.size, dtype=np.uint8)
        _, i_own, i_peer = np.intersect1d(self.st.positions, pos, return_indices=True)
        peer[i_own] = bases[i_peer]
        self.st.peer_bases = peer
        self.st.basis_msgs[self.peer_dir] = env.message

    def accept_verify(self, env: AuthEnvelope) -> None:
        return None

    def accept_rand(self, env: AuthEnvelope) -> None:
        try:
            _, _, _, bits = unpack_fields(env.message, 4)
            self.st.rand_bits = unpack_bits(bits)
        except DecodeError:
            self.st.rand_bits = BitString()

    def accept_qber_sample(self, message: bytes):
        # Eve answers the sample honestly from what she sent or measured
        self._take_sample()
        _, raw = unpack_fields(message, 2)
        peer = unpack_bits(raw).bits
        if peer.size != self.st.sample_bits.size:
            peer = np.resize(peer, self.st.sample_bits.size)
        self.st.qber = qber_from_samples(self.st.sample_bits, peer, self.st.sample, 0.5)
        return self.st.qber

    def basis_envelope(self) -> AuthEnvelope:
        env = self._recorded(Phase.BASIS_SIFT)
        self.st.basis_msgs[self.own_dir] = env.message
        return env

    def verify_envelope(self, phase: Phase) -> AuthEnvelope:
        env = self._recorded(phase)
        if env is None:
            return self._garbage(phase)
        if env.auth_mode is AuthMode.PQC_SIGN_ENCRYPT and self.insider is not None:
            try:
                digest = pke_decrypt(self.insider.enc, env.ciphertext)
            except DecryptionError:
                return env
            ct = pke_encrypt(self.peer_enc_public, digest, self._rng(f"reencrypt:{phase.value}"))
            return env.replace(ciphertext=ct)
        return env

    def rand_envelope(self) -> AuthEnvelope:
        env = self._recorded(Phase.RAND_TRANSFER)
        if env is None:
            return self._garbage(Phase.RAND_TRANSFER)
        self.accept_rand(env)
        return env

    # Eve's own bookkeeping failures must never show up as a victim abort.
    def plan_lengths(self) -> int:
        try:
            return super().plan_lengths()
        except ProtocolAbort:
            return 0

    def amplify(self):
        try:
            return super().amplify()
        except (ValueError, ProtocolAbort):
            return None

    def second_amplify(self):
        try:
            return super().second_amplify()
        except (ValueError, ProtocolAbort, AttributeError):
            return None

    def check_commit(self) -> None:
        return None

    def commit(self) -> int:
        self.last, self.st = self.st, None
        return 0


class ReplayTransmitter(_Replayer):
    """Eve in the transmitter seat, replaying the recorded transmitter's messages.

    She emits signal states only at the recorded detection positions, in the
    recorded bases, and vacuum everywhere else, so a lossless receiver reports
    exactly the recorded positions.
    """

    def prepare(self) -> Pulses:
        pos = self.recorded.positions()
        _, bases = self.recorded.basis(self.own_dir)
        bits = self._rng("eve-bits").integers(0, 2, pos.size, dtype=np.uint8)
        self.st.pulses = vacuum_padded(pos, bases, bits, self.config.channel.pulse_count)
        return self.st.pulses

    def receive_positions(self, message: bytes) -> None:
        # keep her own (recorded) positions; the victim's list may differ
        super().receive_positions(encode_positions(self.recorded.positions()))


class ReplayReceiver(_Replayer):
    """Eve in the receiver seat: measures in the recorded receiver bases and
    reports the recorded positions."""

    def measure(self, pulses: Pulses) -> bytes:
        pos = self.recorded.positions()
        _, bases = self.recorded.basis(self.own_dir)
        rng = self._rng("eve-detector")
        rx_basis = rng.integers(0, 2, len(pulses), dtype=np.uint8)
        rx_basis[pos] = bases
        det = transmit_and_measure(pulses, self.config.channel, rng, receiver_basis=rx_basis)
        bits = np.where(det.detected[pos], det.bit[pos], rng.integers(0, 2, pos.size))
        self._set_records(pos, bits.astype(np.uint8), bases)
        return encode_positions(pos)
