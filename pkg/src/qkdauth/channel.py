"""Classical simulation of BB84 preparation, transmission and detection.

Single-photon idealisation: each pulse is either a signal state or vacuum.
States map to (basis, bit) as |H>=(Z,0), |V>=(Z,1), |+>=(X,0), |->=(X,1).
Everything is vectorised over pulses; ``PulseRecord``/``DetectionEvent`` give
per-pulse views when needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

Z, X = 0, 1
SIGNAL, VACUUM = 1, 0


@dataclass(frozen=True)
class ChannelConfig:
    transmittance: float = 0.5
    flip_prob: float = 0.02
    detector_efficiency: float = 0.6
    dark_count_prob: float = 0.0
    pulse_count: int = 100_000

    def __post_init__(self):
        for name in ("transmittance", "flip_prob", "detector_efficiency", "dark_count_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.pulse_count < 0:
            raise ValueError(f"pulse_count must be >= 0, got {self.pulse_count}")

    @property
    def detection_prob(self) -> float:
        return self.transmittance * self.detector_efficiency

    @classmethod
    def lossless(cls, pulse_count: int, flip_prob: float = 0.0) -> ChannelConfig:
        return cls(1.0, flip_prob, 1.0, 0.0, pulse_count)


class PulseRecord(NamedTuple):
    index: int
    basis: int
    bit: int
    intensity: int


class DetectionEvent(NamedTuple):
    index: int
    basis: int
    bit: int
    detected: bool


def _frozen(a: np.ndarray, dtype=np.uint8) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Pulses:
    basis: np.ndarray
    bit: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        for name in ("basis", "bit", "intensity"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __len__(self) -> int:
        return int(self.basis.size)

    def __getitem__(self, i: int) -> PulseRecord:
        return PulseRecord(i, int(self.basis[i]), int(self.bit[i]), int(self.intensity[i]))

    def records(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class Detections:
    basis: np.ndarray
    bit: np.ndarray
    detected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", _frozen(self.basis))
        object.__setattr__(self, "bit", _frozen(self.bit))
        object.__setattr__(self, "detected", _frozen(self.detected, bool))

    def __len__(self) -> int:
        return int(self.basis.size)

    def __getitem__(self, i: int) -> DetectionEvent:
        return DetectionEvent(i, int(self.basis[i]), int(self.bit[i]), bool(self.detected[i]))

    def events(self):
        return (self[i] for i in range(len(self)))


def prepare_pulses(rng: np.random.Generator, config: ChannelConfig) -> Pulses:
    n = config.pulse_count
    return Pulses(
        basis=rng.integers(0, 2, n, dtype=np.uint8),
        bit=rng.integers(0, 2, n, dtype=np.uint8),
        intensity=np.full(n, SIGNAL, dtype=np.uint8),
    )


def transmit_and_measure(pulses: Pulses, config: ChannelConfig, rng: np.random.Generator,
                         receiver_basis: np.ndarray | None = None) -> Detections:
    """Send ``pulses`` through a lossy, noisy channel into a detector.

    ``receiver_basis`` overrides the receiver's otherwise uniform basis
    choice; an impersonating receiver uses it to measure in replayed bases.
    """
    n = len(pulses)
    if receiver_basis is None:
        rx_basis = rng.integers(0, 2, n, dtype=np.uint8)
    else:
        rx_basis = np.asarray(receiver_basis, dtype=np.uint8)
    u_detect = rng.random(n)
    u_flip = rng.random(n)
    coin = rng.integers(0, 2, n, dtype=np.uint8)

    signal = pulses.intensity == SIGNAL
    detected = np.where(signal, u_detect < config.detection_prob, u_detect < config.dark_count_prob)
    matched = rx_basis == pulses.basis
    flipped = (u_flip < config.flip_prob).astype(np.uint8)
    bit = np.where(signal & matched, pulses.bit ^ flipped, coin)
    bit = np.where(detected, bit, 0)
    return Detections(basis=rx_basis, bit=bit, detected=detected)


@dataclass
class WireTap:
    """Adversary handle on the quantum wire and the classical transcript.

    A passive tap only records. Setting ``substitute`` lets the adversary
    replace the pulse train the receiver sees.
    """

    pulses_seen: list[Pulses] = field(default_factory=list)
    transcript: list = field(default_factory=list)
    substitute: Callable[[Pulses], Pulses] | None = None

    def on_pulses(self, pulses: Pulses) -> Pulses:
        self.pulses_seen.append(pulses)
        return self.substitute(pulses) if self.substitute else pulses

    def on_message(self, record) -> None:
        self.transcript.append(record)


def intercept_tap(substitute: Callable[[Pulses], Pulses] | None = None) -> WireTap:
    return WireTap(substitute=substitute)


def vacuum_padded(positions: np.ndarray, basis: np.ndarray, bit: np.ndarray,
                  pulse_count: int) -> Pulses:
    """Signal states at ``positions`` with the given basis/bit; vacuum elsewhere."""
    b = np.zeros(pulse_count, dtype=np.uint8)
    v = np.zeros(pulse_count, dtype=np.uint8)
    inten = np.full(pulse_count, VACUUM, dtype=np.uint8)
    b[positions] = basis
    v[positions] = bit
    inten[positions] = SIGNAL
    return Pulses(basis=b, bit=v, intensity=inten)
