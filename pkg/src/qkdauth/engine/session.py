"""One party's side of a post-processing round.

A ``Session`` only ever sees its own records, its own keys and what arrives
over the classical channel. Role ``"A"`` is the transmitter, ``"B"`` the
receiver. The round driver in :mod:`qkdauth.engine.link` calls the methods in
protocol order and moves messages between the two sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from ..channel import Pulses, prepare_pulses, transmit_and_measure
from ..crypto import (DecodeError, DecryptionError, hash_digest, otp_encrypt, pke_decrypt,
                      pke_encrypt, sign, verify, verify_certificate)
from ..crypto.encoding import pack_bits, pack_fields, pack_u32, unpack_bits, unpack_fields, unpack_u32
from ..crypto.pki import Certificate
from ..crypto.toeplitz import ToeplitzSeed
from ..errors import InsufficientKey, ProtocolAbort
from ..postprocessing import (CorrectedKey, FinalKey, LeakageLedger, QberEstimate, SiftedKey,
                              compute_final_length, decode_basis_message, decode_positions,
                              encode_basis_message, encode_positions, privacy_amplify,
                              qber_from_samples, report_valid_detections, round_nonce,
                              sample_indices, second_amplification, sift_local, split_sample,
                              verification_digest)
from ..randomness import public_coin, stream
from .config import ProtocolConfig
from .modes import AuthMode, Phase, Stage, Variant, auth_mode
from .pool import KeyPool, KeyReuseError
from .transcript import A_TO_B, B_TO_A, AuthEnvelope

# Position of each one-way digest inside a reserved authentication slice.
PIECE_INDEX = {
    (Phase.EC_VERIFY, A_TO_B): 0,
    (Phase.EC_VERIFY, B_TO_A): 1,
    (Phase.FINAL_VERIFY, A_TO_B): 2,
    (Phase.FINAL_VERIFY, B_TO_A): 3,
}
SLICE_INDEX = {A_TO_B: 0, B_TO_A: 1}


@dataclass
class RoundState:
    round_index: int
    chain_round: int
    positions: np.ndarray | None = None
    bits: np.ndarray | None = None
    bases: np.ndarray | None = None
    peer_bases: np.ndarray | None = None
    basis_msgs: dict = field(default_factory=dict)
    nonce: bytes = b""
    sifted: SiftedKey | None = None
    sample: np.ndarray | None = None
    sample_bits: np.ndarray | None = None
    remaining: SiftedKey | None = None
    qber: QberEstimate | None = None
    corrected: CorrectedKey | None = None
    ledger: LeakageLedger | None = None
    ell: int = 0
    ell2: int = 0
    n_seed: int = 0
    rand_bits: BitString | None = None
    final: FinalKey | None = None
    step8_leak: int = 0
    consumed: dict = field(default_factory=dict)
    pulses: Pulses | None = None


def final_key_slice_tag(final: BitString, slice_bits: int, nonce: bytes,
                        direction: str) -> BitString:
    """Tag for one direction of slice-based final key verification.

    The agreed prefix of ``2 * slice_bits`` bits is the pad material; the
    digest covers only the remainder.
    """
    if len(final) < 2 * slice_bits + 1:
        raise ProtocolAbort(Stage.FINAL_VERIFY,
                            f"final key of {len(final)} bits cannot spare 2x{slice_bits} slice bits")
    i = SLICE_INDEX[direction]
    pad = final[i * slice_bits:(i + 1) * slice_bits]
    d = verification_digest(final[2 * slice_bits:], nonce,
                            f"{Phase.FINAL_VERIFY.value}:{direction}", slice_bits)
    return otp_encrypt(pad, d)


def final_key_slice_verify(final_a: BitString, final_b: BitString, slice_bits: int,
                           nonce: bytes = b"") -> bool:
    """Two-way check that both final keys agree, using their own prefix as pad."""
    for direction in (A_TO_B, B_TO_A):
        if final_key_slice_tag(final_a, slice_bits, nonce, direction) != final_key_slice_tag(
                final_b, slice_bits, nonce, direction):
            return False
    return True


class Session:
    def __init__(self, party, role: str, peer_id: str, ca_public: bytes,
                 config: ProtocolConfig, seed: int, pool: KeyPool | None = None):
        if role not in ("A", "B"):
            raise ValueError("role must be 'A' or 'B'")
        self.party = party
        self.role = role
        self.peer_id = peer_id
        self.ca_public = ca_public
        self.config = config
        self.seed = seed
        self.pool = pool if pool is not None else KeyPool(f"{party.name}<->{peer_id}")
        self.peer_sig_public: bytes | None = None
        self.peer_enc_public: bytes | None = None
        self.st: RoundState | None = None
        self.last: RoundState | None = None

    @property
    def own_dir(self) -> str:
        return A_TO_B if self.role == "A" else B_TO_A

    @property
    def peer_dir(self) -> str:
        return B_TO_A if self.role == "A" else A_TO_B

    def _rng(self, purpose: str) -> np.random.Generator:
        return stream(self.seed, f"{self.party.name}:{purpose}", self.st.round_index)

    def _digest(self, message: bytes) -> BitString:
        return hash_digest(message, self.config.digest_bits)

    def _mode(self, phase: Phase) -> AuthMode:
        return auth_mode(self.config.variant, self.st.chain_round, phase)

    # -- PKI -----------------------------------------------------------------

    def certificate_message(self) -> bytes:
        return self.party.certificate.to_bytes()

    def accept_certificate(self, data: bytes) -> None:
        if not verify_certificate(self.ca_public, data):
            raise ProtocolAbort(Stage.BOOTSTRAP, "certificate not signed by trusted CA")
        cert = Certificate.from_bytes(data)
        if cert.subject_id != self.peer_id:
            raise ProtocolAbort(Stage.BOOTSTRAP,
                                f"certificate subject {cert.subject_id!r} is not {self.peer_id!r}")
        self.peer_sig_public = cert.sig_public
        self.peer_enc_public = cert.enc_public

    # -- round lifecycle -----------------------------------------------------

    def begin_round(self, round_index: int, chain_round: int) -> None:
        if self.peer_sig_public is None:
            raise ProtocolAbort(Stage.BOOTSTRAP, "peer certificate not verified")
        self.st = RoundState(round_index, chain_round)
        if self.config.variant is Variant.P1 and chain_round >= 2:
            if len(self.pool.reserved_next) < self.config.otp_budget:
                raise InsufficientKey(
                    Stage.KEY_BUDGET,
                    f"reserved slice has {len(self.pool.reserved_next)} bits, "
                    f"round needs {self.config.otp_budget}")

    # -- Step 1 --------------------------------------------------------------

    def prepare(self) -> Pulses:
        self.st.pulses = prepare_pulses(self._rng("source"), self.config.channel)
        return self.st.pulses

    def measure(self, pulses: Pulses) -> bytes:
        det = transmit_and_measure(pulses, self.config.channel, self._rng("detector"))
        pos = report_valid_detections(det)
        self._set_records(pos, det.bit[pos], det.basis[pos])
        return encode_positions(pos)

    def receive_positions(self, message: bytes) -> None:
        try:
            pos = decode_positions(message)
        except DecodeError as exc:
            raise ProtocolAbort(Stage.DETECTION, f"bad positions message: {exc}") from None
        pulses = self.st.pulses
        if pos.size and (pos.max() >= len(pulses) or np.any(np.diff(pos) <= 0)):
            raise ProtocolAbort(Stage.DETECTION, "positions out of range or not increasing")
        self._set_records(pos, pulses.bit[pos], pulses.basis[pos])

    def _set_records(self, pos, bits, bases) -> None:
        if pos.size == 0:
            raise ProtocolAbort(Stage.DETECTION, "no valid detections")
        self.st.positions, self.st.bits, self.st.bases = pos, bits, bases

    # -- Step 2: basis sifting -----------------------------------------------

    def basis_envelope(self) -> AuthEnvelope:
        msg = encode_basis_message(self.st.positions, self.st.bases)
        self.st.basis_msgs[self.own_dir] = msg
        return self._signed_envelope(Phase.BASIS_SIFT, msg)

    def _signed_envelope(self, phase: Phase, msg: bytes) -> AuthEnvelope:
        tag = sign(self.party.sig, self._digest(msg))
        return AuthEnvelope(phase.value, self.own_dir, msg, AuthMode.PQC_SIGN_ONLY, signature=tag)

    def _check_signed(self, env: AuthEnvelope, phase: Phase) -> None:
        if env.phase != phase.value or env.direction != self.peer_dir:
            raise ProtocolAbort(phase.value, "unexpected envelope")
        if not verify(self.peer_sig_public, self._digest(env.message), env.signature):
            raise ProtocolAbort(phase.value, "signature failure")

    def accept_basis(self, env: AuthEnvelope) -> None:
        self._check_signed(env, Phase.BASIS_SIFT)
        try:
            pos, bases = decode_basis_message(env.message)
        except DecodeError:
            raise ProtocolAbort(Stage.BASIS_SIFT, "malformed basis message") from None
        if not np.array_equal(pos, self.st.positions):
            raise ProtocolAbort(Stage.BASIS_SIFT, "digest mismatch: positions differ from reported detections")
        self.st.peer_bases = bases
        self.st.basis_msgs[self.peer_dir] = env.message

    def finish_sift(self) -> SiftedKey:
        st = self.st
        st.nonce = round_nonce(st.basis_msgs[B_TO_A], st.basis_msgs[A_TO_B])
        st.sifted = sift_local(st.positions, st.bits, st.bases, st.peer_bases)
        if len(st.sifted.bits) == 0:
            raise ProtocolAbort(Stage.BASIS_SIFT, "no matching bases")
        return st.sifted

    # -- Step 3 --------------------------------------------------------------

    def _take_sample(self) -> None:
        st = self.st
        if st.sample is None:
            st.sample = sample_indices(len(st.sifted.bits), self.config.sample_fraction,
                                       public_coin(st.nonce + b"qber-sample"))
            st.sample_bits, st.remaining = split_sample(st.sifted, st.sample)

    def qber_sample_message(self) -> bytes:
        self._take_sample()
        return pack_fields(b"qber", pack_bits(BitString(self.st.sample_bits)))

    def accept_qber_sample(self, message: bytes) -> QberEstimate:
        try:
            tag, raw = unpack_fields(message, 2)
            peer = unpack_bits(raw).bits
        except DecodeError:
            raise ProtocolAbort(Stage.QBER, "malformed sample message") from None
        self._take_sample()
        if tag != b"qber" or peer.size != self.st.sample_bits.size:
            raise ProtocolAbort(Stage.QBER, "sample size mismatch")
        est = qber_from_samples(self.st.sample_bits, peer, self.st.sample,
                                self.config.qber_threshold)
        self.st.qber = est
        if est.abort:
            raise ProtocolAbort(Stage.QBER, f"QBER {est.rate:.4f} above threshold {est.threshold}")
        return est

    def set_corrected(self, corrected: CorrectedKey) -> None:
        self.st.corrected = corrected
        self.st.ledger = LeakageLedger(corrected.ec_leak_bits, 0, self.config.margin_bits)

    # -- Steps 4 and 7: verification -----------------------------------------

    def _verify_key(self, phase: Phase) -> BitString:
        return self.st.corrected.bits if phase is Phase.EC_VERIFY else self.st.final.bits

    def _count_leak(self, phase: Phase, mode: AuthMode) -> None:
        if mode in (AuthMode.PQC_SIGN_ONLY, AuthMode.PQC_SIGN_ENCRYPT):
            if phase is Phase.EC_VERIFY:
                self.st.ledger.digest_leak_bits += self.config.digest_bits
            else:
                self.st.step8_leak += self.config.digest_bits

    def _otp_piece(self, phase: Phase, direction: str) -> BitString:
        L = self.config.digest_bits
        try:
            piece = self.pool.auth_piece(PIECE_INDEX[(phase, direction)], L)
        except KeyReuseError as exc:
            raise ProtocolAbort(Stage.KEY_BUDGET, str(exc)) from None
        self.st.consumed[phase.value] = self.st.consumed.get(phase.value, 0) + L
        return piece

    def verify_envelope(self, phase: Phase) -> AuthEnvelope:
        st, L = self.st, self.config.digest_bits
        mode = self._mode(phase)
        direction = self.own_dir
        label = f"{phase.value}:{direction}"
        key = self._verify_key(phase)
        if mode is AuthMode.FINAL_KEY_SLICE:
            tag = final_key_slice_tag(key, self.config.slice_bits, st.nonce, direction)
            return AuthEnvelope(phase.value, direction, b"", mode, otp_tag=tag)
        d = verification_digest(key, st.nonce, label, L)
        self._count_leak(phase, mode)
        if mode is AuthMode.PQC_SIGN_ONLY:
            return AuthEnvelope(phase.value, direction, d.to_bytes(), mode,
                                signature=sign(self.party.sig, d))
        if mode is AuthMode.PQC_SIGN_ENCRYPT:
            ct = pke_encrypt(self.peer_enc_public, d, self._rng(f"pke:{phase.value}"))
            return AuthEnvelope(phase.value, direction, b"", mode,
                                signature=sign(self.party.sig, d), ciphertext=ct)
        tag = otp_encrypt(self._otp_piece(phase, direction), d)
        return AuthEnvelope(phase.value, direction, b"", mode, otp_tag=tag)

    def accept_verify(self, env: AuthEnvelope) -> None:
        st, L = self.st, self.config.digest_bits
        phase = Phase(env.phase)
        mode = self._mode(phase)
        stage = phase.value
        if env.direction != self.peer_dir:
            raise ProtocolAbort(stage, "unexpected direction")
        if env.auth_mode is not mode:
            raise ProtocolAbort(stage, f"expected {mode.value}, got {env.auth_mode.value}")
        key = self._verify_key(phase)
        if mode is AuthMode.FINAL_KEY_SLICE:
            expected = final_key_slice_tag(key, self.config.slice_bits, st.nonce, env.direction)
            if env.otp_tag != expected:
                raise ProtocolAbort(stage, "key mismatch")
            return
        expected = verification_digest(key, st.nonce, f"{phase.value}:{env.direction}", L)
        self._count_leak(phase, mode)
        if mode is AuthMode.OTP_DIGEST:
            piece = self._otp_piece(phase, env.direction)
            if env.otp_tag is None or len(env.otp_tag) != L:
                raise ProtocolAbort(stage, "malformed tag")
            if otp_encrypt(piece, env.otp_tag) != expected:
                raise ProtocolAbort(stage, "digest mismatch")
            return
        if mode is AuthMode.PQC_SIGN_ONLY:
            if len(env.message) * 8 != L:
                raise ProtocolAbort(stage, "malformed digest")
            received = BitString.from_bytes(env.message)
        else:
            try:
                received = pke_decrypt(self.party.enc, env.ciphertext)
            except DecryptionError:
                raise ProtocolAbort(stage, "undecryptable digest") from None
            if len(received) != L:
                raise ProtocolAbort(stage, "malformed digest")
        if not verify(self.peer_sig_public, received, env.signature):
            raise ProtocolAbort(stage, "signature failure")
        if received != expected:
            raise ProtocolAbort(stage, "digest mismatch")

    # -- Step 5/6 ------------------------------------------------------------

    def plan_lengths(self) -> int:
        st, cfg = self.st, self.config
        k = len(st.corrected.bits)
        st.ell = compute_final_length(k, st.qber.rate, st.ledger)
        if st.ell <= 0:
            raise InsufficientKey(Stage.PRIVACY_AMP, "no secure key after leakage accounting")
        st.n_seed = k + st.ell - 1
        if self._two_stage():
            st.ell2 = st.ell - 2 * cfg.digest_bits - cfg.step8_margin_bits
            if st.ell2 <= 0:
                raise InsufficientKey(Stage.PRIVACY_AMP, "second amplification leaves no key")
        return st.ell

    def _two_stage(self) -> bool:
        return self._mode(Phase.FINAL_VERIFY) is AuthMode.PQC_SIGN_ENCRYPT

    def _rand_len(self) -> int:
        return 2 * self.st.n_seed if self._two_stage() else self.st.n_seed

    def rand_envelope(self) -> AuthEnvelope:
        st = self.st
        st.rand_bits = BitString.random(self._rand_len(), self._rng("rand"))
        msg = pack_fields(b"rand", pack_u32(len(st.corrected.bits)), pack_u32(st.ell),
                          pack_bits(st.rand_bits))
        return self._signed_envelope(Phase.RAND_TRANSFER, msg)

    def accept_rand(self, env: AuthEnvelope) -> None:
        self._check_signed(env, Phase.RAND_TRANSFER)
        try:
            tag, k_raw, ell_raw, bits_raw = unpack_fields(env.message, 4)
            k, ell, bits = unpack_u32(k_raw), unpack_u32(ell_raw), unpack_bits(bits_raw)
        except DecodeError:
            raise ProtocolAbort(Stage.RAND_TRANSFER, "malformed random-number message") from None
        if tag != b"rand" or k != len(self.st.corrected.bits) or ell != self.st.ell:
            raise ProtocolAbort(Stage.RAND_TRANSFER, "dimension mismatch")
        if len(bits) != self._rand_len():
            raise ProtocolAbort(Stage.RAND_TRANSFER, "wrong number of random bits")
        self.st.rand_bits = bits

    def amplify(self) -> FinalKey:
        st = self.st
        seed = ToeplitzSeed.from_bits(st.rand_bits[:st.n_seed], len(st.corrected.bits), st.ell)
        st.final = privacy_amplify(st.corrected, seed, st.round_index)
        return st.final

    def second_amplify(self) -> FinalKey:
        st = self.st
        if not self._two_stage():
            return st.final
        seed2 = ToeplitzSeed.from_bits(st.rand_bits[st.n_seed:], st.ell, st.ell2)
        st.final = second_amplification(st.final, seed2, st.step8_leak,
                                        self.config.step8_margin_bits)
        return st.final

    # -- commit / abort ------------------------------------------------------

    def _slice_total(self) -> int:
        return 2 * self.config.slice_bits if self.config.variant is Variant.P2 else 0

    def _reserve_total(self) -> int:
        return self.config.otp_budget if self.config.variant is Variant.P1 else 0

    def check_commit(self) -> None:
        need = self._slice_total() + self._reserve_total()
        if self.st.final.length < need:
            raise InsufficientKey(
                Stage.KEY_BUDGET,
                f"final key of {self.st.final.length} bits cannot fund {need} authentication bits")

    def _entry(self, status: str, **extra) -> dict:
        st = self.st
        led = st.ledger
        entry = {
            "round": st.round_index,
            "chain_round": st.chain_round,
            "status": status,
            "stage": None,
            "reason": None,
            "sifted_bits": len(st.sifted.bits) if st.sifted is not None else 0,
            "k": len(st.corrected.bits) if st.corrected is not None else 0,
            "qber": st.qber.rate if st.qber is not None else None,
            "ec_leak_bits": led.ec_leak_bits if led else 0,
            "digest_leak_bits": led.digest_leak_bits if led else 0,
            "step8_leak_bits": st.step8_leak,
            "margin_bits": self.config.margin_bits,
            "pa_output_bits": st.ell,
            "generated_bits": 0,
            "consumed_auth_bits": sum(st.consumed.values()),
            "consumed_by_phase": dict(st.consumed),
            "discarded_bits": 0,
            "reserved_bits": 0,
            "stored_bits": 0,
        }
        entry.update(extra)
        return entry

    def commit(self) -> int:
        st = self.st
        slice_total = self._slice_total()
        if slice_total:
            self.pool.consume_current(0, slice_total)
            st.consumed[Phase.FINAL_VERIFY.value] = slice_total
        stored = self.pool.commit(st.final.bits, self._reserve_total(), skip=slice_total)
        self.pool.history.append(self._entry(
            "Success", generated_bits=st.final.length, reserved_bits=len(self.pool.reserved_next),
            stored_bits=stored, pool_bits=len(self.pool.stored)))
        self.last, self.st = st, None
        return stored

    def abort(self, stage: str, reason: str) -> None:
        if self.st is None:
            return
        used = sum(self.st.consumed.values())
        discarded = max(0, self.pool.discard_reserved() - used)
        self.pool.history.append(self._entry(
            "Abort", stage=stage, reason=reason, discarded_bits=discarded,
            pool_bits=len(self.pool.stored)))
        self.last, self.st = self.st, None
