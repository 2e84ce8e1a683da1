"""Sample-sequence carrier shared by the transmit, PA, channel and receiver stages."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ComplexSignal:
    """Complex baseband samples tagged with their rate and timing reference.

    Attributes
    ----------
    samples : ndarray of complex
        The sample sequence.
    sps : int
        Samples per symbol (1 for symbol-rate sequences).
    delay : int
        Sample index of the first symbol's sampling instant. Filters with a
        known group delay add to it so that ``delay + sps * k`` always points
        at symbol ``k``.
    """

    samples: np.ndarray
    sps: int = 1
    delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.samples.ndim != 1:
            raise ValueError("ComplexSignal samples must be one-dimensional")
        if self.sps < 1:
            raise ValueError(f"sps must be >= 1, got {self.sps}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    def with_samples(self, samples: np.ndarray, extra_delay: int = 0) -> "ComplexSignal":
        return replace(self, samples=samples, delay=self.delay + extra_delay)

    @property
    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


def as_signal(x, sps: int = 1) -> ComplexSignal:
    """Wrap a raw array as a :class:`ComplexSignal`; pass signals through."""
    if isinstance(x, ComplexSignal):
        return x
    return ComplexSignal(np.asarray(x, dtype=complex).ravel(), sps=sps)
