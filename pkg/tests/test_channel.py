import numpy as np
import pytest

from conftest import crandn
from scfde.channel import ChannelRealization, NoiseSpec, draw_channel, matched_filter, propagate
from scfde.signal import ComplexSignal
from scfde.txchain import shape


@pytest.mark.parametrize("profile", ["awgn", "symbol_sparse", "dense_exponential"])
def test_unit_power_draws(profile):
    for s in range(20):
        ch = draw_channel(profile, 16, 4, seed=s)
        assert np.sum(np.abs(ch.taps) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_sparse_span_one_is_a_single_unit_tap():
    ch = draw_channel("symbol_sparse", 1, 4, seed=3)
    assert ch.taps.shape == (1,) and abs(ch.taps[0]) == pytest.approx(1.0, abs=1e-12)


def test_sparse_response_is_periodic_in_symbol_rate():
    ch = draw_channel("symbol_sparse", 16, 4, seed=7)
    w = np.linspace(-np.pi, np.pi, 301)
    diff = ch.frequency_response(w + 2 * np.pi / 4) - ch.frequency_response(w)
    assert np.max(np.abs(diff)) < 1e-10


def test_draws_are_seeded():
    a = draw_channel("dense_exponential", 16, 4, seed=11)
    b = draw_channel("dense_exponential", 16, 4, seed=11)
    c = draw_channel("dense_exponential", 16, 4, seed=12)
    np.testing.assert_array_equal(a.taps, b.taps)
    assert not np.allclose(a.taps, c.taps)
    assert a.taps.shape == (64,)


def test_draw_channel_validation():
    with pytest.raises(ValueError):
        draw_channel("rician", 4, 4)
    with pytest.raises(ValueError):
        draw_channel("dense_exponential", 0, 4)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_propagate_unit_tap_is_identity(rng):
    x = crandn(rng, 100)
    np.testing.assert_array_equal(propagate(x, draw_channel("awgn", 1, 4)), x)


def test_propagate_two_tap_hand_convolution():
    x = np.array([1.0, 2.0, 3.0], dtype=complex)
    y = propagate(x, ChannelRealization(np.array([1.0, 0.5j])))
    np.testing.assert_allclose(y, [1.0, 2.0 + 0.5j, 3.0 + 1.0j, 1.5j])


def test_noise_variance():
    y = propagate(np.zeros(1_000_000, dtype=complex), draw_channel("awgn", 1, 4), NoiseSpec(1.0, seed=5))
    assert np.var(y) == pytest.approx(1.0, rel=0.005)
    assert np.mean(y.real**2) == pytest.approx(0.5, rel=0.01)


def test_matched_filter_of_pulse_is_nyquist(rrc):
    y = matched_filter(shape(np.array([1.0 + 0j]), rrc), rrc)
    samples = y.samples[y.delay::4]
    expected = np.zeros(samples.size)
    expected[0] = 1.0
    assert np.max(np.abs(samples - expected)) < 1e-3


def test_matched_filter_zero_input(rrc):
    assert not np.any(matched_filter(ComplexSignal(np.zeros(50), sps=4), rrc).samples)


def test_matched_filtered_white_noise_autocorrelation(rrc):
    # correlation at lag k of filtered white noise equals the pulse autocorrelation
    w = propagate(np.zeros(1_000_000, dtype=complex), draw_channel("awgn", 1, 4), NoiseSpec(1.0, seed=9))
    y = matched_filter(w, rrc)[rrc.taps.size:-rrc.taps.size]
    g = np.correlate(rrc.taps, rrc.taps, mode="full")
    centre = rrc.taps.size - 1
    for k in range(0, 12):
        r = np.vdot(y[:-k or None], y[k:]) / (y.size - k)
        assert abs(r - g[centre + k]) < 0.01
