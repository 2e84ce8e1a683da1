"""Power amplifier behavioral models and output-backoff calibration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .signal import ComplexSignal, as_signal


@dataclass(frozen=True)
class LinearPA:
    """Distortionless reference amplifier (unit gain)."""


@dataclass(frozen=True)
class SalehParams:
    g0: float = 2.0
    a_sat: float = 1.0
    alpha: float = 2.0
    beta: float = 1.0

    def __post_init__(self):
        if self.g0 <= 0 or self.a_sat <= 0:
            raise ValueError("Saleh g0 and a_sat must be positive")
        if self.beta < 0:
            raise ValueError("Saleh beta must be nonnegative")

    @property
    def peak_output(self) -> float:
        return self.g0 * self.a_sat / 2.0


@dataclass(frozen=True, eq=False)
class MemoryPolyParams:
    """Coefficient tensor ``coeffs[k, l + P_b - 1, m + P_c - 1]`` of a memory polynomial."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] % 2 == 0 or c.shape[2] % 2 == 0:
            raise ValueError("coeffs must have shape (K_b, 2*P_b-1, 2*P_c-1)")
        if not np.all(np.isfinite(c)):
            raise ValueError("memory polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def k_b(self) -> int:
        return self.coeffs.shape[0]

    @property
    def p_b(self) -> int:
        return (self.coeffs.shape[1] + 1) // 2

    @property
    def p_c(self) -> int:
        return (self.coeffs.shape[2] + 1) // 2

    @classmethod
    def from_terms(cls, k_b: int, p_b: int, p_c: int, terms: dict) -> "MemoryPolyParams":
        """Build from a sparse ``{(k, l, m): value}`` mapping with signed lags."""
        c = np.zeros((k_b, 2 * p_b - 1, 2 * p_c - 1), dtype=complex)
        for (k, l, m), value in terms.items():
            c[k, l + p_b - 1, m + p_c - 1] = value
        return cls(c)

    def static_gain(self, amplitude: np.ndarray) -> np.ndarray:
        """Complex gain seen by a constant-envelope input of the given amplitudes."""
        per_order = self.coeffs.sum(axis=(1, 2))
        a2 = np.asarray(amplitude, dtype=float) ** 2
        return np.polynomial.polynomial.polyval(a2, per_order)


# Synthetic stand-in for a measured GaN amplifier: compressive third and fifth
# order terms plus weak one-sample memory on both the signal and its envelope.
SYNTHETIC_GAN = MemoryPolyParams.from_terms(
    3, 2, 2,
    {
        (0, 0, 0): 1.0 + 0.0j,
        (0, 1, 0): 0.06 - 0.03j,
        (0, -1, 0): 0.02 + 0.01j,
        (1, 0, 0): -0.28 + 0.07j,
        (1, 0, 1): -0.05 + 0.02j,
        (1, 1, -1): 0.02 - 0.01j,
        (1, 1, 0): -0.03 + 0.015j,
        (2, 0, 0): 0.025 - 0.008j,
        (2, 0, 1): 0.004 - 0.002j,
    },
)

PaModel = Union[LinearPA, SalehParams, MemoryPolyParams]


def saleh_apply(signal, p: SalehParams):
    """Memoryless Saleh AM/AM and AM/PM conversion; phase shift in radians."""
    sig = as_signal(signal)
    x = sig.samples
    r2 = np.abs(x) ** 2
    gain = p.g0 / (1.0 + r2 / p.a_sat**2)
    theta = p.alpha * r2 / (1.0 + p.beta * r2)
    out = x * gain * np.exp(1j * theta)
    return sig.with_samples(out) if isinstance(signal, ComplexSignal) else out


def _shift(x: np.ndarray, d: int) -> np.ndarray:
    """``y[n] = x[n - d]`` with zeros outside the support."""
    if d == 0:
        return x
    y = np.zeros_like(x)
    if abs(d) >= x.shape[0]:
        return y
    if d > 0:
        y[d:] = x[:-d]
    else:
        y[:d] = x[-d:]
    return y


def memory_poly_apply(signal, p: MemoryPolyParams):
    """Evaluate the memory polynomial with zero-padding outside the signal."""
    sig = as_signal(signal)
    x = sig.samples
    span = max(p.p_b - 1, 0) + max(p.p_b + p.p_c - 2, 0)
    if x.shape[0] <= span:
        raise ValueError(f"signal of length {x.shape[0]} not longer than lag span {span}")
    env = np.abs(x) ** 2
    out = np.zeros_like(x)
    for li, l in enumerate(range(-p.p_b + 1, p.p_b)):
        xl = _shift(x, l)
        for mi, m in enumerate(range(-p.p_c + 1, p.p_c)):
            c = p.coeffs[:, li, mi]
            if not np.any(c):
                continue
            e = _shift(env, l + m)
            out += xl * np.polynomial.polynomial.polyval(e, c)
    return sig.with_samples(out) if isinstance(signal, ComplexSignal) else out


def apply_pa(signal, model: PaModel, scale: float = 1.0, output_gain: float = 1.0):
    """Scale the input, run the amplifier model and apply a real output gain."""
    sig = as_signal(signal)
    x = sig.samples * scale
    if isinstance(model, LinearPA):
        y = x
    elif isinstance(model, SalehParams):
        y = saleh_apply(x, model)
    elif isinstance(model, MemoryPolyParams):
        y = memory_poly_apply(x, model)
    else:
        raise TypeError(f"unknown PA model {type(model).__name__}")
    y = y * output_gain
    return sig.with_samples(y) if isinstance(signal, ComplexSignal) else y


def peak_output_amplitude(model: PaModel, grid_max: float = 50.0, n_grid: int = 200_001) -> float:
    """Maximum output amplitude of the static AM/AM curve.

    For the memory polynomial the curve is sampled on a dense amplitude grid
    and the first local maximum is taken; a curve that keeps rising over the
    whole grid has no usable saturation point.
    """
    if isinstance(model, SalehParams):
        return model.peak_output
    if isinstance(model, LinearPA):
        raise ValueError("linear PA has no finite maximum output; backoff target unreachable")
    amps = np.linspace(0.0, grid_max, n_grid)
    out = amps * np.abs(model.static_gain(amps))
    falling = np.nonzero(np.diff(out) < 0)[0]
    if falling.size == 0:
        raise ValueError("memory polynomial AM/AM does not saturate on the search grid")
    return float(out[falling[0]])


@dataclass(frozen=True)
class InputScaling:
    """Input multiplier realising an output backoff, plus the output normalisation.

    ``output_gain`` rescales the PA output so that its mean power per sample is
    ``1 / sps``, i.e. unit symbol energy after a unit-energy matched filter.
    """

    scale: float
    backoff_db: float
    output_gain: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("input scale must be positive")


def measure_backoff(signal, model: PaModel, scale: float) -> float:
    """Output backoff in dB: max output power over mean output power."""
    y = apply_pa(as_signal(signal).samples, model, scale)
    peak = peak_output_amplitude(model)
    return float(10.0 * np.log10(peak**2 / np.mean(np.abs(y) ** 2)))


_BRACKET_SAMPLES = 1 << 15
_BRACKET_SLACK_DB = 0.5


def set_backoff(signal, model: PaModel, target_backoff_db: float, tol_db: float = 1e-3,
                sps: int | None = None) -> InputScaling:
    """Find the input scale giving the requested output backoff on ``signal``.

    The backoff is a decreasing function of the input scale up to the point of
    deepest compression; the root is sought in log-scale on that branch.
    """
    sig = as_signal(signal)
    x = sig.samples
    if isinstance(model, LinearPA):
        raise ValueError("backoff target unreachable: the linear PA ratio does not depend on scale")
    peak = peak_output_amplitude(model)
    rms = np.sqrt(np.mean(np.abs(x) ** 2))
    if rms == 0:
        raise ValueError("calibration signal has zero power")

    def backoff(log_s, samples=x):
        y = apply_pa(samples, model, np.exp(log_s))
        return 10.0 * np.log10(peak**2 / np.mean(np.abs(y) ** 2))

    # bracket on a strided subsample, then refine on the whole signal
    sub = x[:: max(1, x.shape[0] // _BRACKET_SAMPLES)]
    grid = np.log(1.0 / rms) + np.linspace(np.log(1e-3), np.log(1e2), 121)
    values = np.array([backoff(g, sub) for g in grid])
    i_min = int(np.argmin(values))
    if values[i_min] > target_backoff_db + _BRACKET_SLACK_DB:
        raise ValueError(
            f"backoff target {target_backoff_db} dB unreachable; minimum is {values[i_min]:.2f} dB"
        )
    if values[0] < target_backoff_db:
        raise ValueError(f"backoff target {target_backoff_db} dB above the search range")
    j = int(np.argmax(values[:i_min + 1] <= target_backoff_db)) if values[i_min] <= target_backoff_db else i_min
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, i_min)]
    if backoff(lo) < target_backoff_db:
        lo = grid[0]
    if backoff(hi) > target_backoff_db:
        hi = grid[i_min]
        if backoff(hi) > target_backoff_db:
            raise ValueError(f"backoff target {target_backoff_db} dB unreachable on this signal")
    mid = brentq(lambda g: backoff(g) - target_backoff_db, lo, hi, xtol=tol_db * 1e-3)
    v = backoff(mid)
    scale = float(np.exp(mid))
    y = apply_pa(x, model, scale)
    sps = sig.sps if sps is None else sps
    output_gain = float(1.0 / np.sqrt(sps * np.mean(np.abs(y) ** 2)))
    return InputScaling(scale=scale, backoff_db=float(v), output_gain=output_gain)
