"""Bussgang decomposition, spectral analysis and neighbour-dependence probes.

These tools explain *why* the receiver needs both a post-distorter and an FDE
bank: after the PA, the linear part of the waveform sees the channel's fades
while the distortion part does not, and pulse shaping turns a memoryless
nonlinearity into one with memory at symbol rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import welch

from ._validation import as_generator, check_complex_1d, check_positive, check_same_length
from .channel import ChannelRealization, matched_filter, propagate
from .fdebank import split_branches
from .pa import LinearPA, PaModel, apply_pa, set_backoff
from .signal import ComplexSignal, as_signal
from .txchain import PulseShape, QamAlphabet, shape


@dataclass(frozen=True, eq=False)
class BussgangSplit:
    """``x_out = alpha * x_in + residual`` with the residual uncorrelated with ``x_in``."""

    alpha: complex
    residual: ComplexSignal = field(repr=False)

    def cross_correlation(self, x) -> float:
        """Normalised sample correlation ``|sum x^* gamma| / sum |x|^2``."""
        x = np.asarray(as_signal(x).samples)
        return float(np.abs(np.vdot(x, self.residual.samples)) / np.vdot(x, x).real)


def bussgang_decompose(x, x_out) -> BussgangSplit:
    """Least-squares linear gain from ``x`` to ``x_out`` and the remaining distortion."""
    xs = as_signal(x)
    a = check_complex_1d(xs.samples, "x", min_length=1000)
    b = check_complex_1d(as_signal(x_out).samples, "x_out", min_length=1000)
    check_same_length(a, b, ("x", "x_out"))
    p = np.vdot(a, a).real
    if p == 0:
        raise ValueError("input has zero power")
    alpha = complex(np.vdot(a, b) / p)
    return BussgangSplit(alpha, xs.with_samples(b - alpha * a))


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Averaged periodogram on ``omega`` in ``[-pi, pi)``; ``mean(psd)`` equals signal power."""

    omega: np.ndarray = field(repr=False)
    psd: np.ndarray = field(repr=False)
    segment_len: int
    n_segments: int
    window: str = "hann"

    @property
    def power(self) -> float:
        return float(np.mean(self.psd))

    def db(self) -> np.ndarray:
        return 10.0 * np.log10(np.maximum(self.psd, 1e-300))


def estimate_psd(signal, segment_len: int = 256) -> SpectrumEstimate:
    """Welch estimate with a Hann window and 50% overlap.

    Scaled as a density over normalised frequency so that the average bin
    value is the signal power.
    """
    x = check_complex_1d(as_signal(signal).samples, "signal")
    if x.shape[0] < 4 * segment_len:
        raise ValueError(f"signal of length {x.shape[0]} shorter than 4 segments of {segment_len}")
    step = segment_len // 2
    n_seg = 1 + (x.shape[0] - segment_len) // step
    f, p = welch(x, fs=1.0, window="hann", nperseg=segment_len, noverlap=segment_len - step,
                 detrend=False, return_onesided=False, scaling="density")
    order = np.argsort(f)
    return SpectrumEstimate(2.0 * np.pi * f[order], np.maximum(p[order], 0.0), segment_len, n_seg)


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """Symbol-rate response ``response[i, k]`` of branch ``i`` at ``omega[k] = 2 pi k / N``."""

    omega: np.ndarray = field(repr=False)
    response: np.ndarray = field(repr=False)
    alpha: complex = 1.0
    images: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_branches(self) -> int:
        return self.response.shape[0]

    def deepest_bin(self, branch: int = 0) -> int:
        return int(np.argmin(np.abs(self.response[branch])))

    def image_cancellation_db(self, branch: int = 0, k: int | None = None) -> float:
        """``sum |image| / |sum image|`` in dB at bin ``k`` (default: the deepest bin).

        Near 0 dB the response is small because every spectral image is small
        (a channel notch); large values mean the images cancel each other.
        """
        k = self.deepest_bin(branch) if k is None else k
        c = self.images[branch, :, k]
        return float(20.0 * np.log10(np.sum(np.abs(c)) / max(np.abs(np.sum(c)), 1e-300)))

    def fade_depth_db(self, branch: int = 0) -> float:
        """Mean-to-minimum power ratio of one branch's response."""
        g = np.abs(self.response[branch]) ** 2
        return float(10.0 * np.log10(np.mean(g) / np.min(g)))


def effective_channel(taps, pulse: PulseShape, alpha: complex = 1.0, n_grid: int = 512) -> EffectiveChannel:
    """Alias-sum response seen by each decimation phase of the matched-filter output.

    For branch ``i`` the cascade (channel, transmit and matched pulse) is
    sampled at ``mu n + i``; in frequency this folds ``mu`` spectral images,
    each carrying the linear phase of the fractional offset.
    """
    if isinstance(taps, ChannelRealization):
        ch = taps
    else:
        ch = ChannelRealization(check_complex_1d(taps, "taps"))
    mu = pulse.sps
    omega = 2.0 * np.pi * np.arange(n_grid) / n_grid
    images = np.zeros((mu, mu, n_grid), dtype=complex)
    for r in range(mu):
        theta = (omega - 2.0 * np.pi * r) / mu
        c = ch.frequency_response(theta) * np.abs(pulse.frequency_response(theta)) ** 2
        for i in range(mu):
            images[i, r] = alpha * c * np.exp(1j * i * theta) / mu
    return EffectiveChannel(omega, images.sum(axis=1), complex(alpha), images)


@dataclass(frozen=True, eq=False)
class DistortionSpectrumReport:
    """Per-branch symbol-rate spectra of the linear and distortion parts after the channel."""

    linear: list = field(repr=False)
    distortion: list = field(repr=False)
    total_power: np.ndarray = field(repr=False)
    alpha: complex = 1.0
    effective: EffectiveChannel | None = field(default=None, repr=False)

    @property
    def n_branches(self) -> int:
        return len(self.linear)

    def fade_bin(self, branch: int = 0) -> int:
        """Bin where the linear part is weakest relative to its mean."""
        return int(np.argmin(self.linear[branch].psd))

    def ratio_db(self, branch: int = 0) -> np.ndarray:
        """Linear-to-distortion PSD ratio per bin."""
        return self.linear[branch].db() - self.distortion[branch].db()

    def to_csv(self, path) -> None:
        cols = ["omega"]
        for i in range(self.n_branches):
            cols += [f"psd_linear_{i}", f"psd_distortion_{i}"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            omega = self.linear[0].omega
            for k in range(omega.shape[0]):
                row = [f"{omega[k]:.10g}"]
                for lin, dis in zip(self.linear, self.distortion):
                    row += [f"{lin.psd[k]:.10g}", f"{dis.psd[k]:.10g}"]
                w.writerow(row)


def _through_receiver(x: ComplexSignal, channel: ChannelRealization, pulse: PulseShape,
                      n_symbols: int, guard: int) -> np.ndarray:
    y = matched_filter(propagate(x, channel), pulse)
    return split_branches(y, block_start=guard, n_symbols=n_symbols - 2 * guard).branches


def distortion_spectrum_report(alphabet: QamAlphabet, pulse: PulseShape, pa: PaModel,
                               channel: ChannelRealization, backoff_db: float | None = None,
                               n_symbols: int = 100_000, segment_len: int = 256, seed=0,
                               guard: int | None = None) -> DistortionSpectrumReport:
    """Split the PA output into linear and distortion parts and track both to symbol rate.

    Both parts pass separately through the channel, matched filter and
    decimation; the returned spectra are per branch. ``total_power`` holds the
    per-branch power of the undecomposed PA output through the same path.
    """
    if n_symbols * pulse.sps < 100_000:
        raise ValueError("need at least 1e5 waveform samples for a stable spectrum")
    rng = as_generator(seed)
    x = shape(alphabet.points[alphabet.random_indices(n_symbols, rng)], pulse)
    if isinstance(pa, LinearPA) or backoff_db is None:
        scale = 1.0
    else:
        core = ComplexSignal(x.samples[pulse.delay:len(x) - pulse.delay], sps=pulse.sps)
        scale = set_backoff(core, pa, backoff_db).scale
    x_in = x.with_samples(scale * x.samples)
    x_out = apply_pa(x_in, pa)
    split = bussgang_decompose(x_in, x_out)
    g = pulse.span + channel.span_samples // pulse.sps + 1 if guard is None else guard
    lin = _through_receiver(x_in.with_samples(split.alpha * x_in.samples), channel, pulse, n_symbols, g)
    dis = _through_receiver(split.residual, channel, pulse, n_symbols, g)
    tot = _through_receiver(x_out, channel, pulse, n_symbols, g)
    return DistortionSpectrumReport(
        [estimate_psd(b, segment_len) for b in lin],
        [estimate_psd(b, segment_len) for b in dis],
        np.mean(np.abs(tot) ** 2, axis=1),
        split.alpha,
        effective_channel(channel, pulse, split.alpha, n_grid=segment_len),
    )


def mm_residuals(z, symbols, alphabet: QamAlphabet, min_hits: int = 20) -> np.ndarray:
    """``z - w(a) a`` with the per-point coefficient ``w`` fitted on the same data."""
    from .postdist.mm import mm_fit

    z = check_complex_1d(z, "z")
    a = check_complex_1d(symbols, "symbols")
    table, _ = mm_fit(z, a, alphabet, min_hits)
    lab = np.argmin(np.abs(a[:, None] - alphabet.points[None, :]), axis=1)
    return z - table[lab] * a


def _probe_bins(symbols: np.ndarray, alphabet: QamAlphabet, n_rings: int, n_sectors: int) -> np.ndarray:
    lab = np.argmin(np.abs(symbols[:, None] - alphabet.points[None, :]), axis=1)
    if alphabet.order <= 64:
        return lab
    # amplitude alone averages the phase away, so pair quantile rings with phase sectors
    amp = np.abs(alphabet.points)
    edges = np.quantile(amp[lab], np.linspace(0, 1, n_rings + 1)[1:-1])
    ring = np.searchsorted(edges, amp[lab], side="right")
    sector = np.floor((np.angle(alphabet.points[lab]) + np.pi) / (2 * np.pi) * n_sectors).astype(int)
    return ring * n_sectors + np.minimum(sector, n_sectors - 1)


def nonlinear_isi_probe(residuals, symbols, alphabet: QamAlphabet, max_lag: int = 3,
                        min_per_bin: int = 20, n_rings: int = 16, n_sectors: int = 8) -> dict:
    """Neighbour dependence of the symbol-rate distortion, one score per lag.

    ``score(k)`` is the power of ``E[e_m | a_{m-k}]`` around ``E[e]``,
    averaged over the conditioning bins, with the finite-sample bias of the
    bin means removed and normalised by the symbol energy. Bins are the
    constellation points for ``P <= 64`` and, otherwise, amplitude quantile
    rings crossed with phase sectors. Lags wrap cyclically.
    """
    e = check_complex_1d(residuals, "residuals", min_length=10_000)
    a = check_complex_1d(symbols, "symbols")
    check_same_length(e, a, ("residuals", "symbols"))
    check_positive(max_lag, "max_lag")
    bins = _probe_bins(a, alphabet, n_rings, n_sectors)
    n_bins = int(bins.max()) + 1
    es = float(np.mean(np.abs(a) ** 2))
    e_c = e - e.mean()
    n = e.shape[0]
    scores = {}
    for k in [k for k in range(-max_lag, max_lag + 1) if k != 0]:
        b = np.roll(bins, k)
        cnt = np.bincount(b, minlength=n_bins)
        used = cnt > 0
        if np.any(cnt[used] < min_per_bin):
            raise ValueError(f"lag {k}: a conditioning bin has fewer than {min_per_bin} samples")
        sr = np.bincount(b, weights=e_c.real, minlength=n_bins)
        si = np.bincount(b, weights=e_c.imag, minlength=n_bins)
        sq = np.bincount(b, weights=np.abs(e_c) ** 2, minlength=n_bins)
        c = cnt[used]
        m2 = (sr[used] ** 2 + si[used] ** 2) / c**2
        var = sq[used] / c - m2
        debiased = m2 - var / np.maximum(c - 1, 1)
        scores[k] = max(float(np.sum(c / n * debiased)) / es, 0.0)
    return scores
