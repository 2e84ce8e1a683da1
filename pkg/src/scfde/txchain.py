"""QAM mapping, cyclic block extension and RRC pulse shaping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import upfirdn

from ._validation import check_complex_1d
from .signal import ComplexSignal

SQUARE_ORDERS = (4, 16, 64, 256, 1024)


def _gray(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


@dataclass(frozen=True, eq=False)
class QamAlphabet:
    """Unit-energy square QAM constellation with per-axis Gray labels.

    ``points[label]`` is the constellation point carrying the bit pattern
    ``bit_map[label]`` (MSB first). The first half of the bits select the
    in-phase level and the second half the quadrature level; along each axis
    a label of all zeros sits on the most positive level.
    """

    order: int
    points: np.ndarray = field(repr=False)
    bit_map: np.ndarray = field(repr=False)

    @classmethod
    def square(cls, order: int) -> "QamAlphabet":
        if order not in SQUARE_ORDERS:
            raise ValueError(f"unsupported QAM order {order}; choose from {SQUARE_ORDERS}")
        k = int(np.log2(order))
        half = k // 2
        m = 1 << half
        labels = np.arange(order)
        i_label = labels >> half
        q_label = labels & (m - 1)
        # level index whose Gray code equals the label
        inv = np.empty(m, dtype=int)
        inv[_gray(np.arange(m))] = np.arange(m)
        amp = (m - 1) - 2 * np.arange(m)
        points = amp[inv[i_label]] + 1j * amp[inv[q_label]]
        points = points / np.sqrt(2.0 * (order - 1) / 3.0)
        shifts = np.arange(k - 1, -1, -1)
        bit_map = ((labels[:, None] >> shifts) & 1).astype(np.uint8)
        return cls(order=order, points=points, bit_map=bit_map)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def min_distance(self) -> float:
        return float(2.0 / np.sqrt(2.0 * (self.order - 1) / 3.0))

    def random_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.order, size=n)


def map_bits(bits, alphabet: QamAlphabet) -> np.ndarray:
    """Map a bit sequence onto constellation points, ``log2(P)`` bits per symbol."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = alphabet.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = bits.reshape(-1, k) @ weights
    return alphabet.points[labels]


def hard_demap(symbols, alphabet: QamAlphabet) -> np.ndarray:
    """Nearest-point bit decisions; the inverse of :func:`map_bits` on clean symbols."""
    from .detect import conventional_detect

    labels = conventional_detect(symbols, alphabet)
    return alphabet.bit_map[labels].ravel()


@dataclass(frozen=True)
class FrameLayout:
    """Block geometry in symbols: data, CP, CS, fast-time and slow-time training."""

    n_data: int
    n_cp: int
    n_cs: int
    n_ft: int = 0
    n_st: int = 0

    def __post_init__(self):
        for name in ("n_data", "n_cp", "n_cs", "n_ft", "n_st"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_data < 1:
            raise ValueError("n_data must be positive")

    @property
    def extended_length(self) -> int:
        return self.n_cp + self.n_data + self.n_cs

    def check_channel(self, channel_span_symbols: int, l_b: int = 1) -> None:
        if self.n_cp < channel_span_symbols - 1:
            raise ValueError(
                f"n_cp={self.n_cp} shorter than channel span {channel_span_symbols} - 1"
            )
        if self.n_cs < l_b - 1:
            raise ValueError(f"n_cs={self.n_cs} shorter than anticausal CSI span {l_b} - 1")


def add_cyclic_extension(block, layout: FrameLayout | None = None, *, n_cp: int | None = None,
                         n_cs: int | None = None) -> np.ndarray:
    """Return ``[last n_cp of block | block | first n_cs of block]``."""
    block = check_complex_1d(block, "block")
    if layout is not None:
        n_cp, n_cs = layout.n_cp, layout.n_cs
    n_cp = 0 if n_cp is None else n_cp
    n_cs = 0 if n_cs is None else n_cs
    n = block.shape[0]
    if n_cp > n or n_cs > n:
        raise ValueError(f"cyclic extension ({n_cp}, {n_cs}) longer than block {n}")
    if n_cp < 0 or n_cs < 0:
        raise ValueError("extension lengths must be nonnegative")
    return np.concatenate([block[n - n_cp:], block, block[:n_cs]])


@dataclass(frozen=True, eq=False)
class PulseShape:
    taps: np.ndarray = field(repr=False)
    roll_off: float
    span: int
    sps: int

    @property
    def delay(self) -> int:
        """Group delay in samples (index of the peak tap)."""
        return (self.taps.shape[0] - 1) // 2

    def frequency_response(self, omega: np.ndarray) -> np.ndarray:
        """Zero-phase response ``P(e^{j omega})`` at sample-rate frequencies."""
        n = np.arange(self.taps.shape[0]) - self.delay
        return np.exp(-1j * np.outer(omega, n)) @ self.taps


def design_rrc(roll_off: float = 0.3, span: int = 20, sps: int = 4) -> PulseShape:
    """Unit-energy root-raised-cosine taps over ``span`` symbols at ``sps`` samples/symbol."""
    if not 0.0 <= roll_off <= 1.0:
        raise ValueError(f"roll_off must lie in [0, 1], got {roll_off}")
    if span < 4:
        raise ValueError(f"span must be >= 4 symbols, got {span}")
    if sps < 2:
        raise ValueError(f"sps must be >= 2, got {sps}")
    if (span * sps) % 2:
        raise ValueError("span * sps must be even for a symmetric filter")
    b = roll_off
    t = (np.arange(span * sps + 1) - span * sps / 2) / sps
    h = np.empty_like(t)
    if b == 0.0:
        h[:] = np.sinc(t)
    else:
        zero = np.isclose(t, 0.0, atol=1e-12)
        sing = np.isclose(np.abs(t), 1.0 / (4.0 * b), atol=1e-12)
        reg = ~(zero | sing)
        tr = t[reg]
        h[reg] = (np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))) / (
            np.pi * tr * (1 - (4 * b * tr) ** 2)
        )
        h[zero] = 1.0 - b + 4.0 * b / np.pi
        h[sing] = (b / np.sqrt(2.0)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
        )
    h /= np.sqrt(np.sum(h**2))
    return PulseShape(taps=h, roll_off=float(roll_off), span=int(span), sps=int(sps))


def shape(symbols, pulse: PulseShape) -> ComplexSignal:
    """Upsample by ``pulse.sps`` and filter; the output keeps both filter tails."""
    symbols = check_complex_1d(symbols, "symbols")
    samples = upfirdn(pulse.taps, symbols, up=pulse.sps)
    return ComplexSignal(samples, sps=pulse.sps, delay=pulse.delay)
