from .campaigns import (DEFAULT_K_BITS, SCENARIOS, STANDARD_SCENARIOS, AttackOutcome,
                        CampaignStats, Cast, CollisionStats, PhaseResult, Scenario,
                        attack_config, attack_round, ec_collision_campaign, late_forgery_check,
                        pulses_for_k, replay_basis_sift, replay_ec_verify,
                        replay_rand_transfer, resolve_scenario, run_full_mitm, scenario_names)
from .mitm import EnvelopeReplayer, Tamperer
from .recording import InsiderKeys, RecordedSession, Recorder, record_session
from .replay import ReplayReceiver, ReplayTransmitter

__all__ = [
    "DEFAULT_K_BITS", "SCENARIOS", "STANDARD_SCENARIOS", "AttackOutcome", "CampaignStats",
    "Cast", "CollisionStats", "EnvelopeReplayer", "InsiderKeys", "PhaseResult",
    "RecordedSession", "Recorder", "ReplayReceiver", "ReplayTransmitter", "Scenario",
    "Tamperer", "attack_config", "attack_round", "ec_collision_campaign", "late_forgery_check",
    "pulses_for_k", "record_session", "replay_basis_sift", "replay_ec_verify",
    "replay_rand_transfer", "resolve_scenario", "run_full_mitm", "scenario_names",
]
