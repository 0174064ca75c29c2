"""Attack scenarios, single-phase replay checks and trial statistics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from ..channel import ChannelConfig
from ..crypto import CertificateAuthority, pke_decrypt, pke_encrypt, verify
from ..crypto.encoding import pack_fields
from ..engine.config import ProtocolConfig
from ..engine.link import ClassicalChannel, Link, bootstrap_pki, run_round, signature_height
from ..engine.modes import PHASE_ORDER, AuthMode, Phase, Stage
from ..engine.party import Party
from ..engine.session import Session
from ..engine.transcript import A_TO_B, B_TO_A
from ..errors import ProtocolAbort
from ..postprocessing import CorrectedKey, LeakageLedger, verification_digest
from ..randomness import stream
from .recording import Recorder, RecordedSession, record_session
from .replay import ReplayReceiver, ReplayTransmitter

DEFAULT_K_BITS = 64


@dataclass(frozen=True)
class AttackOutcome:
    deepest_phase_passed: str | None
    aborted_at: str | None
    success: bool


@dataclass(frozen=True)
class PhaseResult:
    phase: str
    passed: bool
    reason: str | None = None


@dataclass
class CampaignStats:
    scenario: str
    trials: int
    k_bits: int
    successes: int = 0
    aborted_at: Counter = field(default_factory=Counter)
    deepest_phase_passed: Counter = field(default_factory=Counter)
    outcomes: list[AttackOutcome] = field(default_factory=list, repr=False)

    def add(self, out: AttackOutcome) -> None:
        self.outcomes.append(out)
        self.successes += out.success
        self.aborted_at[str(out.aborted_at)] += 1
        self.deepest_phase_passed[str(out.deepest_phase_passed)] += 1

    def fraction_aborted_at(self, stage: str) -> float:
        return self.aborted_at[stage] / max(self.trials, 1)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trials": self.trials,
            "k_bits": self.k_bits,
            "successes": self.successes,
            "aborted_at": dict(sorted(self.aborted_at.items())),
            "deepest_phase_passed": dict(sorted(self.deepest_phase_passed.items())),
        }


def pulses_for_k(k_bits: int, sample_fraction: float = 0.1) -> int:
    """Pulse count that yields about ``k_bits`` corrected bits on a lossless line."""
    return max(8, math.ceil(k_bits / (0.5 * (1 - sample_fraction))))


def attack_config(k_bits: int = DEFAULT_K_BITS, base: ProtocolConfig | None = None) -> ProtocolConfig:
    base = base or ProtocolConfig()
    return base.replace(channel=ChannelConfig.lossless(pulses_for_k(k_bits, base.sample_fraction)))


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, trial]).generate_state(1, np.uint64)[0])


class Cast:
    """Everyone the scenarios need, keyed from one seed.

    Signature trees are sized for the campaign: the recorded pair signs in
    both the recorded and (outsider case) the attacked round.
    """

    def __init__(self, seed: int, trials: int):
        self.seed = seed
        self.ca = CertificateAuthority("ca", stream(seed, "ca:keygen"), height=2)
        self.rogue_ca = CertificateAuthority("rogue-ca", stream(seed, "rogue:keygen"), height=2)
        big, small = signature_height(2 * trials), signature_height(trials)
        self.heights = {"alice": big, "bob": big, "charlie": small}
        self._parties: dict[str, Party] = {}
        self._forged: dict[str, bytes] = {}

    def party(self, name: str) -> Party:
        if name not in self._parties:
            if name == "eve":
                p = Party.create("eve", self.rogue_ca, stream(self.seed, "eve:keygen"), 2)
            else:
                p = Party.create(name, self.ca, stream(self.seed, f"{name}:keygen"),
                                 self.heights[name])
            self._parties[name] = p
        return self._parties[name]

    def forged_certificate(self, subject: str) -> bytes:
        if subject not in self._forged:
            eve = self.party("eve")
            self._forged[subject] = self.rogue_ca.issue(subject, eve.sig.public,
                                                        eve.enc.public).to_bytes()
        return self._forged[subject]


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    eve_role: str            # seat Eve takes in the attacked round
    impersonated: str
    victim: str
    insider: str | None = None
    forged_cert: bool = False


SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in (
        Scenario("outsider-replay", "outsider replays an alice/bob round back to bob",
                 "A", "alice", "bob"),
        Scenario("outsider-forged-cert", "outsider presents a rogue-CA certificate for alice",
                 "A", "alice", "bob", forged_cert=True),
        Scenario("insider-ex-bob", "former bob impersonates alice toward receiver charlie",
                 "A", "alice", "charlie", insider="bob"),
        Scenario("insider-ex-alice", "former alice impersonates bob toward transmitter charlie",
                 "B", "bob", "charlie", insider="alice"),
    )
}
ALIASES = {"insider-mitm": "insider-ex-bob"}
STANDARD_SCENARIOS = ("outsider-replay", "insider-ex-bob", "insider-ex-alice")
EXTRA_SCENARIOS = ("collision-rate", "late-forgery")


def scenario_names() -> list[str]:
    return sorted([*SCENARIOS, *ALIASES, *EXTRA_SCENARIOS])


def resolve_scenario(name: str) -> Scenario:
    name = ALIASES.get(name, name)
    if name not in SCENARIOS:
        raise KeyError(f"unknown attack scenario {name!r}")
    return SCENARIOS[name]


def _deepest_passed(records, eve_dir: str) -> str | None:
    deepest = None
    for phase in PHASE_ORDER:
        seen = [r for r in records if r.phase == phase.value and r.direction == eve_dir]
        if not seen or any(r.verdict != "pass" for r in seen):
            break
        deepest = phase.value
    return deepest


def attack_round(scenario: Scenario, cast: Cast, config: ProtocolConfig, seed: int,
                 recorded: RecordedSession | None = None) -> AttackOutcome:
    """One recorded honest alice/bob round followed by one attacked round."""
    if recorded is None:
        recorded = record_session(cast.party("alice"), cast.party("bob"), cast.ca.public,
                                  config, seed)
    victim_party = cast.party(scenario.victim)
    eve_party = cast.party(scenario.insider) if scenario.insider else cast.party("eve")
    victim_role = "B" if scenario.eve_role == "A" else "A"
    cls = ReplayTransmitter if scenario.eve_role == "A" else ReplayReceiver
    eve = cls(eve_party, scenario.eve_role, scenario.victim, cast.ca.public, config, seed ^ 0x5EED,
              recorded=recorded, impersonated=scenario.impersonated,
              insider=recorded.insiders.get(scenario.insider) if scenario.insider else None,
              certificate=cast.forged_certificate(scenario.impersonated) if scenario.forged_cert else None)
    victim = Session(victim_party, victim_role, scenario.impersonated, cast.ca.public, config,
                     seed ^ 0xC0FFEE)
    alice, bob = (eve, victim) if scenario.eve_role == "A" else (victim, eve)
    channel = ClassicalChannel()
    try:
        bootstrap_pki(alice, bob, channel)
    except ProtocolAbort as exc:
        return AttackOutcome(None, exc.stage, False)
    out = run_round(alice, bob, channel, 1, 1)
    deepest = _deepest_passed(out.transcript, eve.own_dir)
    if not out.success:
        return AttackOutcome(deepest, out.stage, False)
    same = (victim.last.final is not None and eve.last.final is not None
            and victim.last.final.bits == eve.last.final.bits)
    return AttackOutcome(deepest, None, bool(same))


def run_full_mitm(scenario: str | Scenario, trials: int, seed: int = 0,
                  k_bits: int = DEFAULT_K_BITS, config: ProtocolConfig | None = None,
                  cast: Cast | None = None) -> CampaignStats:
    """Repeat ``attack_round`` with independent per-trial seeds."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sc = resolve_scenario(scenario) if isinstance(scenario, str) else scenario
    cfg = attack_config(k_bits, config)
    cast = cast or Cast(seed, trials)
    stats = CampaignStats(sc.name, trials, k_bits)
    for t in range(trials):
        stats.add(attack_round(sc, cast, cfg, _trial_seed(seed, t)))
    return stats


# -- single-phase replays ----------------------------------------------------

def replay_basis_sift(recorded: RecordedSession, victim: Session,
                      eve_party: Party | None = None) -> PhaseResult:
    """Eve plays transmitter to ``victim`` (role B) up to the BasisSift check.

    The victim's own channel configuration decides what it detects, so a lossy
    victim reports positions that no longer match the recorded message.
    """
    eve = ReplayTransmitter(eve_party or victim.party, "A", victim.party.name, victim.ca_public,
                            victim.config, victim.seed ^ 0x5EED, recorded=recorded,
                            impersonated="alice")
    victim.peer_sig_public = None
    channel = ClassicalChannel()
    try:
        bootstrap_pki(eve, victim, channel)
        eve.begin_round(1, 1)
        victim.begin_round(1, 1)
        pulses = eve.prepare()
        channel.plain(1, Stage.DETECTION, B_TO_A, victim.measure(pulses), eve.receive_positions)
        channel.deliver(1, victim.basis_envelope(), eve.accept_basis)
        channel.deliver(1, eve.basis_envelope(), victim.accept_basis)
    except ProtocolAbort as exc:
        return PhaseResult(Stage.BASIS_SIFT, False, f"{exc.stage}: {exc.reason}")
    return PhaseResult(Stage.BASIS_SIFT, True)


def _victim_at_ec(victim: Session, key: BitString, nonce: bytes) -> None:
    victim.begin_round(1, 1)
    victim.st.nonce = nonce
    victim.set_corrected(CorrectedKey(key, 0))


def reencrypt_for(insider_enc, env, victim_enc_public: bytes, rng):
    if env.auth_mode is not AuthMode.PQC_SIGN_ENCRYPT:
        return env
    digest = pke_decrypt(insider_enc, env.ciphertext)
    return env.replace(ciphertext=pke_encrypt(victim_enc_public, digest, rng))


def replay_ec_verify(recorded: RecordedSession, victim: Session, victim_key: BitString,
                     insider: str = "bob") -> PhaseResult:
    """Replay the recorded A->B ECVerify envelope to ``victim`` holding ``victim_key``.

    The victim's nonce is aligned with the recorded one, which is the most
    favourable case for Eve; only the key itself then decides the outcome.
    """
    env = recorded.envelope(Stage.EC_VERIFY, A_TO_B)
    keys = recorded.insiders[insider]
    _victim_at_ec(victim, victim_key, recorded.nonce)
    env = reencrypt_for(keys.enc, env, victim.party.enc.public, stream(victim.seed, "eve:reenc"))
    try:
        victim.accept_verify(env)
    except ProtocolAbort as exc:
        return PhaseResult(Stage.EC_VERIFY, False, exc.reason)
    return PhaseResult(Stage.EC_VERIFY, True)


def replay_rand_transfer(recorded: RecordedSession, victim: Session, k: int, ell: int,
                         tamper: bool = False) -> PhaseResult:
    """Isolated RandTransfer replay: the victim expects a seed for (k, ell)."""
    env = recorded.envelope(Stage.RAND_TRANSFER, A_TO_B)
    if env is None:
        return PhaseResult(Stage.RAND_TRANSFER, False, "nothing recorded")
    if tamper:
        msg = bytearray(env.message)
        msg[-1] ^= 0x01
        env = env.replace(message=bytes(msg))
    victim.begin_round(1, 1)
    victim.st.corrected = CorrectedKey(BitString.zeros(k), 0)
    victim.st.ledger = LeakageLedger(0, 0, 0)
    victim.st.ell, victim.st.n_seed = ell, k + ell - 1
    try:
        victim.accept_rand(env)
    except ProtocolAbort as exc:
        return PhaseResult(Stage.RAND_TRANSFER, False, exc.reason)
    return PhaseResult(Stage.RAND_TRANSFER, True)


# -- collision experiment ----------------------------------------------------

@dataclass(frozen=True)
class CollisionStats:
    k_bits: int
    trials: int
    passes: int
    expected: float
    sigma: float

    @property
    def rate(self) -> float:
        return self.passes / self.trials

    @property
    def within_5_sigma(self) -> bool:
        return abs(self.passes - self.expected) <= 5 * self.sigma

    def to_dict(self) -> dict:
        return {"scenario": "collision-rate", "k_bits": self.k_bits, "trials": self.trials,
                "passes": self.passes, "rate": self.rate, "expected_rate": 2.0 ** -self.k_bits,
                "expected_passes": self.expected, "sigma": self.sigma,
                "within_5_sigma": self.within_5_sigma}


def ec_collision_campaign(k_bits: int, trials: int, seed: int = 0,
                          config: ProtocolConfig | None = None) -> CollisionStats:
    """Empirical ECVerify replay pass rate against fresh victim keys.

    Alice signs and encrypts one real ECVerify digest to Bob; ex-Bob decrypts
    it and re-encrypts to Charlie. The signature is checked once (it is valid,
    and independent of the victim key). Each trial then draws the victim's
    corrected key uniformly, which is what fresh bases and outcomes give.
    """
    cfg = config or ProtocolConfig()
    cast = Cast(seed, 1)
    alice, bob, charlie = (cast.party(n) for n in ("alice", "bob", "charlie"))
    rng = stream(seed, "collision", k_bits)
    old_key = BitString.random(k_bits, rng)
    nonce = bytes(rng.integers(0, 256, 32, dtype=np.uint8))

    a = Session(alice, "A", "bob", cast.ca.public, cfg, seed)
    a.peer_sig_public, a.peer_enc_public = bob.sig.public, bob.enc.public
    _victim_at_ec(a, old_key, nonce)
    env = a.verify_envelope(Phase.EC_VERIFY)
    digest = pke_decrypt(bob.enc, env.ciphertext)
    replayed = pke_decrypt(charlie.enc, pke_encrypt(charlie.enc.public, digest, rng))
    if not verify(alice.sig.public, replayed, env.signature):
        raise AssertionError("recorded signature does not verify")

    label = f"{Phase.EC_VERIFY.value}:{A_TO_B}"
    keys = rng.integers(0, 2, (trials, k_bits), dtype=np.uint8)
    passes = sum(verification_digest(BitString(row), nonce, label, cfg.digest_bits) == replayed
                 for row in keys)
    p = 2.0 ** -k_bits
    return CollisionStats(k_bits, trials, int(passes), trials * p, math.sqrt(trials * p * (1 - p)))


# -- late forgery ------------------------------------------------------------

def late_forgery_check(config: ProtocolConfig, seed: int, rounds: int = 3,
                       chunk_bytes: int = 8) -> dict:
    """Run an honest link under a recorder and look for stored key bytes on the wire.

    No forgery game is defined, so the only claim checked is that bits kept in
    the pool were never transmitted in any form a later forger could read.
    """
    tap = Recorder()
    link = Link.create(config, seed, rounds, adversary=tap)
    link.run(rounds)
    wire = b"".join(pack_fields(r.envelope.message, r.envelope.auth_material())
                    for r in tap.records)
    exposed = 0
    stored = link.alice.pool.stored.to_bytes()
    for i in range(0, len(stored) - chunk_bytes + 1, chunk_bytes):
        exposed += stored[i:i + chunk_bytes] in wire
    return {"scenario": "late-forgery", "rounds": rounds,
            "successful_rounds": sum(o.success for o in link.outcomes),
            "stored_bits": len(link.alice.pool.stored), "chunks_checked": len(stored) // chunk_bytes,
            "exposed_chunks": exposed}
