import csv

import numpy as np
import pytest

from conftest import crandn
from scfde.analysis import (
    bussgang_decompose,
    distortion_spectrum_report,
    effective_channel,
    estimate_psd,
    mm_residuals,
    nonlinear_isi_probe,
)
from scfde.channel import ChannelRealization, draw_channel, matched_filter, propagate
from scfde.fdebank import split_branches
from scfde.pa import LinearPA, SalehParams, saleh_apply
from scfde.txchain import add_cyclic_extension, shape

SALEH = SalehParams()


# Bussgang decomposition

def test_bussgang_identity_and_scaling(rng):
    x = crandn(rng, 5000)
    s = bussgang_decompose(x, x)
    assert s.alpha == pytest.approx(1.0) and np.max(np.abs(s.residual.samples)) < 1e-12
    s3 = bussgang_decompose(x, 3 * x)
    assert s3.alpha == pytest.approx(3.0) and np.max(np.abs(s3.residual.samples)) < 1e-12


def test_bussgang_gain_matches_gaussian_quadrature():
    rng = np.random.default_rng(8)
    x = crandn(rng, 400_000)
    s = bussgang_decompose(x, saleh_apply(x, SALEH))
    # E[x^* Psi(x)] for x ~ CN(0, 1) by two-dimensional Gauss-Hermite quadrature
    t, w = np.polynomial.hermite.hermgauss(80)
    u, v = np.meshgrid(t, t, indexing="ij")
    z = (u + 1j * v)            # CN(0, 1) after the exp(-t^2) weight
    ref = np.sum(np.outer(w, w) / np.pi * np.conj(z) * saleh_apply(z.ravel(), SALEH).reshape(z.shape))
    assert abs(s.alpha - ref) / abs(ref) < 0.01
    assert s.cross_correlation(x) < 1e-12


def test_bussgang_validation(rng):
    with pytest.raises(ValueError):
        bussgang_decompose(crandn(rng, 100), crandn(rng, 100))
    with pytest.raises(ValueError):
        bussgang_decompose(np.zeros(2000), crandn(rng, 2000))
    with pytest.raises(ValueError):
        bussgang_decompose(crandn(rng, 2000), crandn(rng, 2001))


# spectrum estimation

def test_psd_white_noise_is_flat():
    x = crandn(np.random.default_rng(2), 200_000)
    est = estimate_psd(x, 64)
    assert est.n_segments >= 100
    assert np.max(np.abs(est.psd - 1.0)) < 0.05
    assert est.power == pytest.approx(np.mean(np.abs(x) ** 2), rel=0.01)
    assert est.omega[0] == pytest.approx(-np.pi) and np.all(np.diff(est.omega) > 0)


def test_psd_tone_peak():
    w0 = 2 * np.pi * 20 / 256
    est = estimate_psd(np.exp(1j * w0 * np.arange(50_000)), 256)
    assert est.omega[np.argmax(est.psd)] == pytest.approx(w0, abs=1e-12)
    assert np.sort(est.db())[-1] - np.sort(est.db())[-4] > 20


def test_psd_of_shaped_qam_follows_pulse(rrc, qam64):
    rng = np.random.default_rng(4)
    x = shape(qam64.points[rng.integers(0, 64, 100_000)], rrc)
    est = estimate_psd(x, 256)
    ref = np.abs(rrc.frequency_response(est.omega)) ** 2 / rrc.sps
    band = ref > 0.1 * ref.max()
    assert np.max(np.abs(est.psd[band] / ref[band] - 1.0)) < 0.05


def test_psd_needs_four_segments(rng):
    with pytest.raises(ValueError):
        estimate_psd(crandn(rng, 500), 256)


# effective symbol-rate channel

def test_effective_channel_unit_tap_is_flat(rrc):
    ec = effective_channel(np.array([1.0]), rrc, alpha=0.7, n_grid=128)
    np.testing.assert_allclose(np.abs(ec.response[0]), 0.7, atol=2e-3)
    assert ec.n_branches == 4


def test_effective_channel_symbol_sparse_factorises(rrc):
    ch = draw_channel("symbol_sparse", 8, 4, seed=5)
    ec = effective_channel(ch, rrc, n_grid=256)
    g = ch.taps[::4]
    h_sym = np.exp(-1j * np.outer(ec.omega, np.arange(g.size))) @ g
    assert np.max(np.abs(ec.response[0] - h_sym)) < 2e-3
    assert ec.image_cancellation_db(0) < 0.5


def test_effective_channel_branches_average_to_cascade_dc_gain(rrc):
    for seed in range(5):
        ch = draw_channel("dense_exponential", 16, 4, seed=seed)
        alpha = 0.8 - 0.1j
        ec = effective_channel(ch, rrc, alpha, n_grid=256)
        k = int(np.argmin(np.abs(ec.omega)))
        zero = np.zeros(1)
        ref = alpha * ch.frequency_response(zero)[0] * abs(rrc.frequency_response(zero)[0]) ** 2 / rrc.sps
        assert ec.omega[k] == 0.0
        assert abs(ec.response[:, k].mean() - ref) < 1e-6


def _pilot_sweep(ch, pulse, n):
    """Per-branch transfer function measured by sending a periodic pilot block."""
    rng = np.random.default_rng(99)
    a = np.exp(2j * np.pi * rng.random(n))
    ext = n
    y = matched_filter(propagate(shape(add_cyclic_extension(a, n_cp=ext, n_cs=ext), pulse), ch), pulse)
    br = split_branches(y, block_start=0, n_symbols=n, n_cp=ext).branches
    return np.fft.fft(br, axis=1) / np.fft.fft(a)[None, :]


def test_effective_channel_matches_pilot_sweep(rrc):
    n = 512
    for seed in (1, 2, 3):
        ch = draw_channel("dense_exponential", 16, 4, seed=seed)
        ec = effective_channel(ch, rrc, n_grid=n)
        meas = _pilot_sweep(ch, rrc, n)
        for i in range(4):
            rms = np.sqrt(np.mean(np.abs(meas[i]) ** 2))
            assert np.max(np.abs(ec.response[i] - meas[i])) / rms < 0.02


def test_image_cancellation_flags_alias_fades(rrc):
    # a path delayed by half a symbol makes branch 0's two spectral images cancel at the band edge
    ec = effective_channel(ChannelRealization(np.array([0.0, 0.0, 1.0])), rrc, n_grid=512)
    k = ec.deepest_bin(0)
    assert ec.omega[k] == pytest.approx(np.pi)
    assert ec.fade_depth_db(0) > 20 and ec.image_cancellation_db(0) > 20
    # the same path leaves branch 2 flat: no fade, no cancellation
    assert ec.fade_depth_db(2) < 1 and ec.image_cancellation_db(2) < 1


# distortion spectra

def test_linear_pa_has_no_distortion(rrc, qam64):
    ch = draw_channel("dense_exponential", 16, 4, seed=1)
    rep = distortion_spectrum_report(qam64, rrc, LinearPA(), ch, None, n_symbols=30_000, segment_len=128)
    for i in range(rep.n_branches):
        assert np.max(rep.distortion[i].db() - rep.linear[i].db()) < -40


def test_saleh_report_power_and_csv(tmp_path, rrc, qam64):
    ch = draw_channel("symbol_sparse", 16, 4, seed=0)
    rep = distortion_spectrum_report(qam64, rrc, SALEH, ch, 6.0, n_symbols=30_000, segment_len=128)
    for i in range(4):
        tot = rep.linear[i].power + rep.distortion[i].power
        assert tot / rep.total_power[i] == pytest.approx(1.0, abs=0.01)
    assert 10 < np.median(rep.ratio_db(0)) < 35
    rep.to_csv(tmp_path / "s.csv")
    with open(tmp_path / "s.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["omega", "psd_linear_0", "psd_distortion_0"] and len(rows) == 129
    with pytest.raises(ValueError):
        distortion_spectrum_report(qam64, rrc, SALEH, ch, 6.0, n_symbols=1000)


# neighbour-dependence probe

def test_probe_detects_lag_one_dependence(rng, qam16):
    a = qam16.points[rng.integers(0, 16, 50_000)]
    prev = np.roll(a, 1)
    e = 0.05 * prev * np.abs(prev) ** 2 + 0.01 * crandn(rng, a.size)
    s = nonlinear_isi_probe(e, a, qam16, max_lag=2)
    assert set(s) == {-2, -1, 1, 2}
    assert s[1] > 1e-3
    assert max(s[-1], s[2], s[-2]) < 1e-5


def test_probe_pure_noise_scores_vanish(rng, qam64):
    a = qam64.points[rng.integers(0, 64, 100_000)]
    s = nonlinear_isi_probe(0.1 * crandn(rng, a.size), a, qam64)
    assert max(s.values()) < 1e-5


def test_probe_ring_bins_for_large_alphabets(rng):
    from scfde.txchain import QamAlphabet

    alph = QamAlphabet.square(256)
    a = alph.points[rng.integers(0, 256, 40_000)]
    prev = np.roll(a, -1)
    s = nonlinear_isi_probe(0.05 * prev * np.abs(prev) ** 2, a, alph, max_lag=1, n_rings=8)
    assert s[-1] > 10 * s[1]


def test_probe_saleh_scores_decay_with_lag(rrc, qam64):
    from scfde.link import calibrate
    from scfde.pa import apply_pa

    sc = calibrate(qam64, rrc, SALEH, 6.0)
    a = qam64.points[qam64.random_indices(100_000, np.random.default_rng(3))]
    mf = matched_filter(apply_pa(shape(a, rrc), SALEH, sc.scale, sc.output_gain), rrc)
    z = mf.samples[mf.delay::rrc.sps][:a.size]
    s = nonlinear_isi_probe(mm_residuals(z, a, qam64), a, qam64, max_lag=3)
    for k in (1, 2):
        assert s[k + 1] < s[k] and s[-k - 1] < s[-k]


def test_probe_validation(rng, qam64):
    a = qam64.points[rng.integers(0, 64, 12_000)]
    with pytest.raises(ValueError):
        nonlinear_isi_probe(crandn(rng, 5000), a[:5000], qam64)
    with pytest.raises(ValueError):
        nonlinear_isi_probe(crandn(rng, a.size), a, qam64, min_per_bin=500)


def test_mm_residuals_remove_per_point_gain(rng, qam16):
    a = qam16.points[rng.integers(0, 16, 5000)]
    gain = 1.0 - 0.2 * np.abs(a) ** 2 + 0.1j
    np.testing.assert_allclose(mm_residuals(gain * a, a, qam16), 0.0, atol=1e-12)
