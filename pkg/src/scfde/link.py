"""End-to-end block transmission and FDE-bank front end.

A transmission is a run of cyclically extended blocks shaped as one
continuous waveform, amplified, passed through the channel and matched
filtered. :class:`LinkSetup` bundles the fixed parameters of one operating
point; :func:`run_front_end` returns the equalized branch outputs for a
fast-time training block followed by one or more payload blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, NoiseSpec, matched_filter, propagate
from .fdebank import FDEBank, split_branches
from .pa import InputScaling, LinearPA, PaModel, apply_pa, set_backoff
from .signal import ComplexSignal
from .txchain import FrameLayout, PulseShape, QamAlphabet, add_cyclic_extension, shape


@dataclass(frozen=True, eq=False)
class LinkSetup:
    alphabet: QamAlphabet
    layout: FrameLayout
    pulse: PulseShape
    pa: PaModel = field(default_factory=LinearPA)
    scaling: InputScaling = field(default_factory=lambda: InputScaling(1.0, float("nan"), 1.0))
    l_b: int = 4
    l_f: int = 16

    @property
    def sps(self) -> int:
        return self.pulse.sps


def calibrate(alphabet: QamAlphabet, pulse: PulseShape, pa: PaModel, backoff_db: float | None,
              seed=12345, n_symbols: int = 32768) -> InputScaling:
    """Input scale for the requested output backoff, measured on a random shaped stream.

    For the linear PA (or ``backoff_db=None``) the scale is one and only the
    output normalisation to unit symbol energy is computed.
    """
    rng = np.random.default_rng(seed)
    x = shape(alphabet.points[alphabet.random_indices(n_symbols, rng)], pulse)
    core = x.samples[pulse.delay:len(x) - pulse.delay]
    if isinstance(pa, LinearPA) or backoff_db is None:
        y = apply_pa(core, pa)
        gain = 1.0 / np.sqrt(pulse.sps * np.mean(np.abs(y) ** 2))
        return InputScaling(1.0, float("nan"), float(gain))
    return set_backoff(ComplexSignal(core, sps=pulse.sps), pa, backoff_db)


def transmit(setup: LinkSetup, blocks) -> tuple[ComplexSignal, list[int]]:
    """Shape and amplify consecutive cyclically extended blocks.

    Returns the PA output (normalised to unit symbol energy) and, per block,
    the stream index of its first prefix symbol.
    """
    lay = setup.layout
    ext, starts, pos = [], [], 0
    for b in blocks:
        e = add_cyclic_extension(b, n_cp=lay.n_cp, n_cs=lay.n_cs)
        ext.append(e)
        starts.append(pos)
        pos += e.shape[0]
    x = shape(np.concatenate(ext), setup.pulse)
    s = setup.scaling
    return apply_pa(x, setup.pa, s.scale, s.output_gain), starts


def receive(setup: LinkSetup, tx: ComplexSignal, channel: ChannelRealization, n0: float, rng) -> ComplexSignal:
    y = propagate(tx, channel, NoiseSpec(n0), rng=rng)
    return matched_filter(y, setup.pulse)


@dataclass(eq=False)
class FrontEndOutput:
    """Equalized branch outputs: ``ft_z`` is ``(mu, N_F)``, each payload ``(mu, N_D)``."""

    ft_z: np.ndarray = field(repr=False)
    data_z: list = field(repr=False)
    bank: FDEBank = field(repr=False)
    ft_y: np.ndarray = field(repr=False)


def run_front_end(setup: LinkSetup, ft_symbols: np.ndarray, data_blocks: list, channel: ChannelRealization,
                  n0: float, rng, delta: float | None = None, branches=None) -> FrontEndOutput:
    """Transmit ``[FT | data...]``, then LS-acquire and MMSE-equalize every branch."""
    tx, starts = transmit(setup, [ft_symbols, *data_blocks])
    mf = receive(setup, tx, channel, n0, rng)
    lay = setup.layout
    ft = split_branches(mf, block_start=starts[0], n_symbols=ft_symbols.shape[0], n_cp=lay.n_cp).branches
    data = [
        split_branches(mf, block_start=s, n_symbols=b.shape[0], n_cp=lay.n_cp).branches
        for s, b in zip(starts[1:], data_blocks)
    ]
    if branches is not None:
        ft = ft[list(branches)]
        data = [d[list(branches)] for d in data]
    bank = FDEBank(setup.l_b, setup.l_f, delta=n0 if delta is None else delta, cyclic=True)
    bank.fit(ft, ft_symbols)
    return FrontEndOutput(bank.transform(ft), [bank.transform(d) for d in data], bank, ft)
