from fractions import Fraction

import pytest

from qkdauth.adversary import EnvelopeReplayer, Tamperer
from qkdauth.bits import BitString
from qkdauth.channel import ChannelConfig
from qkdauth.crypto import CertificateAuthority
from qkdauth.engine import (A_TO_B, B_TO_A, AuthMode, ClassicalChannel, Link, Party, Phase,
                            ProtocolConfig, Session, Stage, Variant, auth_mode, bootstrap_pki,
                            delta_rate, final_key_slice_verify, key_rate_report,
                            preshared_pairs_required)
from qkdauth.errors import ProtocolAbort
from qkdauth.randomness import stream

LOW_NOISE = ChannelConfig(transmittance=1.0, detector_efficiency=1.0, flip_prob=0.01,
                          pulse_count=20_000)
P1 = ProtocolConfig(channel=LOW_NOISE)
P2 = ProtocolConfig(variant=Variant.P2, channel=LOW_NOISE)

S, E, O, F = (AuthMode.PQC_SIGN_ONLY, AuthMode.PQC_SIGN_ENCRYPT, AuthMode.OTP_DIGEST,
              AuthMode.FINAL_KEY_SLICE)
# rows: BasisSift, ECVerify, RandTransfer, FinalVerify
DISPATCH = {
    ("P1", 1): (S, E, S, E),
    ("P1", "later"): (S, O, S, O),
    ("P2", 1): (S, S, S, F),
    ("P2", "later"): (S, S, S, F),
}


@pytest.mark.parametrize("variant", ["P1", "P2"])
@pytest.mark.parametrize("round_index", range(1, 11))
def test_dispatch_table(variant, round_index):
    row = DISPATCH[(variant, 1 if round_index == 1 else "later")]
    got = tuple(auth_mode(variant, round_index, p) for p in
                (Phase.BASIS_SIFT, Phase.EC_VERIFY, Phase.RAND_TRANSFER, Phase.FINAL_VERIFY))
    assert got == row


def test_dispatch_examples():
    assert auth_mode("P1", 1, "ECVerify") is AuthMode.PQC_SIGN_ENCRYPT
    assert auth_mode("P1", 3, "FinalVerify") is AuthMode.OTP_DIGEST
    assert auth_mode("P2", 1, "FinalVerify") is AuthMode.FINAL_KEY_SLICE
    with pytest.raises(ValueError):
        auth_mode("P1", 0, "BasisSift")


# -- bootstrap ---------------------------------------------------------------

@pytest.fixture(scope="module")
def pki():
    ca = CertificateAuthority("ca", stream(1, "ca"), height=3)
    parties = {n: Party.create(n, ca, stream(1, n), sig_height=3) for n in ("alice", "bob", "carol")}
    return ca, parties


def _pair(ca, parties, a="alice", b="bob", a_peer="bob", b_peer="alice"):
    alice = Session(parties[a], "A", a_peer, ca.public, P1, 1)
    bob = Session(parties[b], "B", b_peer, ca.public, P1, 1)
    return alice, bob


def test_bootstrap_valid(pki):
    ca, parties = pki
    alice, bob = _pair(ca, parties)
    bootstrap_pki(alice, bob, ClassicalChannel())
    assert alice.peer_sig_public == parties["bob"].sig.public
    assert bob.peer_enc_public == parties["alice"].enc.public


def test_bootstrap_rejects_foreign_ca(pki):
    ca, parties = pki
    rogue = CertificateAuthority("rogue", stream(2, "rogue"), height=1)
    eve = Party.create("alice", rogue, stream(2, "eve"), sig_height=2)
    _, bob = _pair(ca, parties)
    mallory = Session(eve, "A", "bob", ca.public, P1, 1)
    with pytest.raises(ProtocolAbort) as exc:
        bootstrap_pki(mallory, bob, ClassicalChannel())
    assert exc.value.stage == Stage.BOOTSTRAP


def test_bootstrap_rejects_wrong_subject(pki):
    ca, parties = pki
    carol, bob = _pair(ca, parties, a="carol")
    with pytest.raises(ProtocolAbort) as exc:
        bootstrap_pki(carol, bob, ClassicalChannel())
    assert exc.value.stage == Stage.BOOTSTRAP


def test_round_before_bootstrap_aborts(pki):
    ca, parties = pki
    alice, _ = _pair(ca, parties)
    with pytest.raises(ProtocolAbort):
        alice.begin_round(1, 1)


# -- honest runs ---------------------------------------------------------------

@pytest.fixture(scope="module")
def p1_link():
    link = Link.create(P1, 42, rounds=3)
    link.run(3)
    return link


@pytest.fixture(scope="module")
def p2_link():
    link = Link.create(P2, 42, rounds=3)
    link.run(3)
    return link


def test_honest_p1_three_rounds(p1_link):
    assert [o.status for o in p1_link.outcomes] == ["Success"] * 3
    assert p1_link.alice.pool.stored == p1_link.bob.pool.stored
    assert p1_link.alice.pool.reserved_next == p1_link.bob.pool.reserved_next
    assert len(p1_link.alice.pool.stored) == sum(o.net_key_bits for o in p1_link.outcomes)


def test_p1_transcript_modes(p1_link):
    for rec in p1_link.transcript:
        if rec.phase in (Phase.EC_VERIFY.value, Phase.FINAL_VERIFY.value):
            want = AuthMode.PQC_SIGN_ENCRYPT if rec.round == 1 else AuthMode.OTP_DIGEST
            assert rec.auth_mode == want.value
            assert rec.verdict == "pass"


def test_p1_ledger_reconciles(p1_link):
    L = P1.digest_bits
    for i, h in enumerate(p1_link.alice.pool.history):
        assert h["generated_bits"] == h["reserved_bits"] + h["stored_bits"]
        if i == 0:
            assert h["digest_leak_bits"] == 2 * L and h["step8_leak_bits"] == 2 * L
            assert h["generated_bits"] == h["pa_output_bits"] - 2 * L
            assert h["consumed_auth_bits"] == 0
        else:
            assert h["digest_leak_bits"] == 0 and h["step8_leak_bits"] == 0
            assert h["generated_bits"] == h["pa_output_bits"]
            assert h["consumed_by_phase"] == {"ECVerify": 2 * L, "FinalVerify": 2 * L}


def test_no_authentication_bit_reused(p1_link):
    for pool in (p1_link.alice.pool, p1_link.bob.pool):
        used = pool.consumed_bit_indices()
        assert len(used) == len(set(used)) == 2 * 4 * P1.digest_bits


def test_two_envelopes_per_verification_phase(p1_link, p2_link):
    for link in (p1_link, p2_link):
        for r in range(1, 4):
            for phase in (Phase.EC_VERIFY.value, Phase.FINAL_VERIFY.value):
                recs = [x for x in link.transcript if x.round == r and x.phase == phase]
                assert sorted(x.direction for x in recs) == [A_TO_B, B_TO_A]
                assert recs[0].auth_material_hex != recs[1].auth_material_hex


def test_direction_digests_differ_for_the_same_key():
    from qkdauth.postprocessing import verification_digest
    key = BitString.random(500, stream(1, "k"))
    a = verification_digest(key, b"nonce", f"ECVerify:{A_TO_B}")
    b = verification_digest(key, b"nonce", f"ECVerify:{B_TO_A}")
    assert a != b


def test_p2_parity(p1_link, p2_link):
    s = P2.slice_bits
    for h1, h2 in zip(p1_link.alice.pool.history, p2_link.alice.pool.history):
        # same seed: sifting and correction are unaffected by the variant
        assert (h1["sifted_bits"], h1["k"], h1["qber"], h1["ec_leak_bits"]) == \
            (h2["sifted_bits"], h2["k"], h2["qber"], h2["ec_leak_bits"])
    for h in p2_link.alice.pool.history:
        assert h["status"] == "Success"
        assert h["digest_leak_bits"] == 2 * P2.digest_bits
        assert h["consumed_by_phase"] == {"FinalVerify": 2 * s}
        assert h["stored_bits"] == h["pa_output_bits"] - 2 * s
    assert p2_link.alice.pool.stored == p2_link.bob.pool.stored
    ec = [x for x in p2_link.transcript if x.phase == "ECVerify"]
    assert all(x.auth_mode == "PqcSignOnly" and len(x.envelope.message) * 8 == 256 for x in ec)


def test_determinism():
    a = Link.create(P1, 9, rounds=2)
    b = Link.create(P1, 9, rounds=2)
    a.run(2)
    b.run(2)
    assert [r.to_dict() for r in a.transcript] == [r.to_dict() for r in b.transcript]
    assert a.alice.pool.snapshot() == b.alice.pool.snapshot()
    assert a.alice.pool.stored == b.alice.pool.stored
    c = Link.create(P1, 10, rounds=2)
    c.run(2)
    assert c.alice.pool.stored != a.alice.pool.stored


# -- aborts ------------------------------------------------------------------

def test_tampered_basis_message_aborts_round_two():
    link = Link.create(P1, 42, rounds=3, adversary=Tamperer(2, "BasisSift", A_TO_B))
    outs = link.run(3)
    assert outs[0].success
    assert (outs[1].status, outs[1].stage, outs[1].reason) == ("Abort", "BasisSift",
                                                                "signature failure")
    # abort atomicity: nothing stored, reserved slice discarded
    h = link.alice.pool.history[1]
    assert h["stored_bits"] == 0 and h["discarded_bits"] == 4 * P1.digest_bits
    assert link.bob.pool.history[1]["stored_bits"] == 0
    # chain restarts with PQC
    assert outs[2].success and outs[2].chain_round == 1
    modes = {x.auth_mode for x in outs[2].transcript if x.phase == "ECVerify"}
    assert modes == {"PqcSignEncrypt"}
    assert link.alice.pool.stored == link.bob.pool.stored


def test_replayed_otp_tags_never_verify():
    replayer = EnvelopeReplayer(3, phases=("ECVerify", "FinalVerify"))
    link = Link.create(P1, 42, rounds=3, adversary=replayer)
    outs = link.run(3)
    assert outs[0].success and outs[1].success
    assert replayer.replayed >= 1
    assert (outs[2].stage, outs[2].reason) == ("ECVerify", "digest mismatch")
    assert link.alice.pool.history[2]["stored_bits"] == 0


def test_chain_aborts_when_key_cannot_fund_next_round():
    starved = ProtocolConfig(channel=ChannelConfig(pulse_count=20_000))
    link = Link.create(starved, 3, rounds=2)
    outs = link.run(2)
    assert all(o.stage == Stage.KEY_BUDGET for o in outs)
    assert len(link.alice.pool.stored) == 0
    assert link.alice.pool.consumed_ranges == []


def test_begin_round_without_reserve_aborts(pki):
    ca, parties = pki
    alice, bob = _pair(ca, parties)
    bootstrap_pki(alice, bob, ClassicalChannel())
    with pytest.raises(ProtocolAbort) as exc:
        alice.begin_round(2, 2)
    assert exc.value.stage == Stage.KEY_BUDGET


def test_qber_above_threshold_aborts():
    noisy = ProtocolConfig(channel=ChannelConfig(flip_prob=0.2, pulse_count=20_000))
    out = Link.create(noisy, 5, rounds=1).run(1)[0]
    assert out.stage == Stage.QBER


def test_rounds_must_be_positive():
    with pytest.raises(ValueError):
        Link.create(P1, 1).run(0)


# -- slice verification --------------------------------------------------------

def test_final_key_slice_verify_examples():
    rng = stream(4, "slice")
    key = BitString.random(1024, rng)
    assert final_key_slice_verify(key, key, 256)
    in_slice = key ^ (BitString.from_str("1") + BitString.zeros(1023))
    assert not final_key_slice_verify(key, in_slice, 256)
    in_rest = key ^ (BitString.zeros(1023) + BitString.from_str("1"))
    assert not final_key_slice_verify(key, in_rest, 256)
    with pytest.raises(ProtocolAbort):
        final_key_slice_verify(key[:512], key[:512], 256)


# -- accounting ----------------------------------------------------------------

def test_delta_rate():
    assert delta_rate(256, 1) == 256
    assert delta_rate(256, 0.5) == 512
    assert delta_rate(256, 10**9) == Fraction(256, 10**9)
    with pytest.raises(ValueError):
        delta_rate(256, 0)


def test_key_rate_report_recount(p1_link):
    hist = p1_link.alice.pool.history
    rep = key_rate_report(hist, 1, 256)
    assert rep["rounds"] == 3 and rep["successful_rounds"] == 3
    assert rep["net_key_bits"] == len(p1_link.alice.pool.stored)
    assert rep["net_key_rate_bps"] == pytest.approx(rep["net_key_bits"] / 3)
    assert rep["consumed_by_phase"] == {"ECVerify": 1024, "FinalVerify": 1024}
    assert rep["consumed_auth_bits"] == 2048
    assert rep["delta_r_bps"] == 256
    assert rep["delta_r_all_sift_rand_digests_bps"] == 768
    with pytest.raises(ValueError):
        key_rate_report([], 1)


@pytest.mark.parametrize("users,pairs", [(2, 1), (10, 45), (1000, 499500)])
def test_preshared_pairs(users, pairs):
    assert preshared_pairs_required(users) == pairs


def test_preshared_pairs_needs_two_users():
    with pytest.raises(ValueError):
        preshared_pairs_required(1)
