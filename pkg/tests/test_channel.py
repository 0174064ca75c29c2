import numpy as np
import pytest

from qkdauth.channel import (SIGNAL, VACUUM, ChannelConfig, intercept_tap, prepare_pulses,
                             transmit_and_measure, vacuum_padded)
from qkdauth.randomness import stream


def within_3sigma(count, n, p):
    return abs(count - n * p) <= 3 * np.sqrt(n * p * (1 - p))


def test_empty_pulse_train(rng):
    assert len(prepare_pulses(rng, ChannelConfig(pulse_count=0))) == 0


def test_basis_and_bit_frequencies():
    p = prepare_pulses(stream(11, "alice"), ChannelConfig(pulse_count=100_000))
    assert within_3sigma(int(p.basis.sum()), 100_000, 0.5)
    assert within_3sigma(int(p.bit.sum()), 100_000, 0.5)
    assert (p.intensity == SIGNAL).all()


def test_reproducible():
    cfg = ChannelConfig(pulse_count=500)
    a = prepare_pulses(stream(5, "alice", 1), cfg)
    b = prepare_pulses(stream(5, "alice", 1), cfg)
    assert np.array_equal(a.basis, b.basis) and np.array_equal(a.bit, b.bit)
    c = prepare_pulses(stream(5, "alice", 2), cfg)
    assert not np.array_equal(a.basis, c.basis)


def test_records_view(rng):
    p = prepare_pulses(rng, ChannelConfig(pulse_count=3))
    recs = list(p.records())
    assert [r.index for r in recs] == [0, 1, 2]
    assert recs[1].basis == p.basis[1]
    with pytest.raises(ValueError):
        p.basis[0] = 1


def test_ideal_channel_detects_all_and_matches(rng):
    cfg = ChannelConfig.lossless(2000)
    p = prepare_pulses(rng, cfg)
    d = transmit_and_measure(p, cfg, rng)
    assert d.detected.all()
    m = d.basis == p.basis
    assert np.array_equal(d.bit[m], p.bit[m])


def test_dead_channel(rng):
    cfg = ChannelConfig(transmittance=0.0, dark_count_prob=0.0, pulse_count=5000)
    d = transmit_and_measure(prepare_pulses(rng, cfg), cfg, rng)
    assert not d.detected.any()


def test_flip_rate_and_detection_rate():
    cfg = ChannelConfig(transmittance=0.8, detector_efficiency=0.5, flip_prob=0.05,
                        pulse_count=400_000)
    p = prepare_pulses(stream(3, "alice"), cfg)
    d = transmit_and_measure(p, cfg, stream(3, "bob"))
    assert within_3sigma(int(d.detected.sum()), cfg.pulse_count, 0.4)
    matched = d.detected & (d.basis == p.basis)
    n_m = int(matched.sum())
    assert within_3sigma(n_m, cfg.pulse_count, 0.2)
    assert within_3sigma(int(np.sum(d.bit[matched] != p.bit[matched])), n_m, 0.05)
    mism = d.detected & (d.basis != p.basis)
    assert within_3sigma(int(np.sum(d.bit[mism] != p.bit[mism])), int(mism.sum()), 0.5)


def test_vacuum_only_dark_counts(rng):
    cfg = ChannelConfig(transmittance=1, detector_efficiency=1, dark_count_prob=0.1,
                        pulse_count=50_000)
    p = vacuum_padded(np.array([], dtype=int), np.array([]), np.array([]), cfg.pulse_count)
    d = transmit_and_measure(p, cfg, rng)
    assert within_3sigma(int(d.detected.sum()), cfg.pulse_count, 0.1)


def test_passive_tap_is_read_only(rng):
    cfg = ChannelConfig(pulse_count=300)
    p = prepare_pulses(stream(1, "a"), cfg)
    tap = intercept_tap()
    seen = tap.on_pulses(p)
    assert seen is p and tap.pulses_seen == [p]
    plain = transmit_and_measure(p, cfg, stream(1, "b"))
    tapped = transmit_and_measure(seen, cfg, stream(1, "b"))
    assert np.array_equal(plain.detected, tapped.detected)
    assert np.array_equal(plain.bit, tapped.bit)


def test_substituted_all_signal_fully_detected(rng):
    cfg = ChannelConfig.lossless(400)
    tap = intercept_tap(lambda _: prepare_pulses(rng, cfg))
    d = transmit_and_measure(tap.on_pulses(prepare_pulses(rng, cfg)), cfg, rng)
    assert d.detected.all()


def test_vacuum_insertion_positions(rng):
    cfg = ChannelConfig.lossless(1000)
    positions = np.sort(rng.choice(1000, 137, replace=False))
    p = vacuum_padded(positions, rng.integers(0, 2, 137), rng.integers(0, 2, 137), 1000)
    assert (p.intensity[positions] == SIGNAL).all()
    assert int((p.intensity == VACUUM).sum()) == 1000 - 137
    d = transmit_and_measure(p, cfg, rng)
    assert np.array_equal(np.flatnonzero(d.detected), positions)


def test_config_validation():
    with pytest.raises(ValueError, match="flip_prob"):
        ChannelConfig(flip_prob=1.5)
