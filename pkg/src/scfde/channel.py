"""Multipath fading, AWGN and matched filtering at the sample rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ._validation import as_generator, check_positive
from .signal import ComplexSignal, as_signal
from .txchain import PulseShape

PROFILES = ("awgn", "symbol_sparse", "dense_exponential")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    taps: np.ndarray = field(repr=False)
    profile: str = "awgn"
    seed: int | None = None

    @property
    def span_samples(self) -> int:
        return self.taps.shape[0]

    def frequency_response(self, omega: np.ndarray) -> np.ndarray:
        n = np.arange(self.taps.shape[0])
        return np.exp(-1j * np.outer(omega, n)) @ self.taps


@dataclass(frozen=True)
class NoiseSpec:
    n0: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        check_positive(self.n0, "n0", strict=False)


def draw_channel(profile: str, span_symbols: int, sps: int, seed=None) -> ChannelRealization:
    """Rayleigh taps under an exponential power-delay profile, unit total power.

    The profile's decay constant is a quarter of the span. ``symbol_sparse``
    places taps on symbol instants only; ``dense_exponential`` on every sample.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown channel profile {profile!r}; choose from {PROFILES}")
    if span_symbols < 1:
        raise ValueError("span_symbols must be >= 1")
    if profile == "awgn":
        return ChannelRealization(np.ones(1, dtype=complex), profile, seed)
    rng = as_generator(seed)
    tau = span_symbols / 4.0
    if profile == "symbol_sparse":
        delays = np.arange(span_symbols, dtype=float)
        g = (rng.standard_normal(span_symbols) + 1j * rng.standard_normal(span_symbols)) / np.sqrt(2)
        g *= np.sqrt(np.exp(-delays / tau))
        taps = np.zeros((span_symbols - 1) * sps + 1, dtype=complex)
        taps[::sps] = g
    else:
        n = span_symbols * sps
        delays = np.arange(n) / sps
        taps = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        taps *= np.sqrt(np.exp(-delays / tau))
    taps /= np.sqrt(np.sum(np.abs(taps) ** 2))
    return ChannelRealization(taps, profile, seed)


def propagate(signal, ch: ChannelRealization, noise: NoiseSpec | None = None, rng=None):
    """Linear convolution with the channel taps plus white complex Gaussian noise."""
    sig = as_signal(signal)
    y = np.convolve(sig.samples, ch.taps) if ch.taps.shape[0] > 1 else sig.samples * ch.taps[0]
    if noise is not None and noise.n0 > 0:
        gen = as_generator(rng if rng is not None else noise.seed)
        w = gen.standard_normal(y.shape[0]) + 1j * gen.standard_normal(y.shape[0])
        y = y + np.sqrt(noise.n0 / 2.0) * w
    return sig.with_samples(y) if isinstance(signal, ComplexSignal) else y


def matched_filter(signal, pulse: PulseShape):
    """Convolve with the time-reversed conjugate pulse and account for its delay."""
    sig = as_signal(signal, sps=pulse.sps)
    mf = np.conj(pulse.taps[::-1])
    x = sig.samples
    y = fftconvolve(x, mf) if x.shape[0] > 4096 else np.convolve(x, mf)
    mf_delay = pulse.taps.shape[0] - 1 - pulse.delay
    return sig.with_samples(y, extra_delay=mf_delay) if isinstance(signal, ComplexSignal) else y
