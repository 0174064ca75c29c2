"""Active wire adversaries that plug into ``ClassicalChannel``."""

from __future__ import annotations

from ..engine.transcript import AuthEnvelope


class EnvelopeReplayer:
    """Swap each envelope of ``round_index`` for the same (phase, direction)
    envelope seen in an earlier round, when one exists."""

    def __init__(self, round_index: int, phases: tuple[str, ...] | None = None):
        self.round_index = round_index
        self.phases = phases
        self.seen: dict[tuple[str, str], AuthEnvelope] = {}
        self.replayed = 0

    def on_envelope(self, round_index: int, env: AuthEnvelope) -> AuthEnvelope:
        key = (env.phase, env.direction)
        wanted = self.phases is None or env.phase in self.phases
        if round_index == self.round_index and wanted and key in self.seen:
            old = self.seen[key]
            if old.auth_mode is env.auth_mode:
                self.replayed += 1
                return old
        if round_index < self.round_index:
            self.seen[key] = env
        return env


class Tamperer:
    """Flip one byte of the message in a chosen (round, phase, direction)."""

    def __init__(self, round_index: int, phase: str, direction: str, offset: int = -1):
        self.target = (round_index, phase, direction)
        self.offset = offset
        self.hits = 0

    def on_envelope(self, round_index: int, env: AuthEnvelope) -> AuthEnvelope:
        if (round_index, env.phase, env.direction) != self.target or not env.message:
            return env
        msg = bytearray(env.message)
        msg[self.offset] ^= 0x01
        self.hits += 1
        return env.replace(message=bytes(msg))
