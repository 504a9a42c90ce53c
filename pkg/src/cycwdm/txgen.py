"""Four-channel WDM band generation.

Symbol generation, QPSK Gray mapping, zero interleaving (50% duty-cycle RZ at
2 Sa/symbol), root-raised-cosine shaping in either of two modes, channel
multiplexing and polarization-multiplexing emulation.

Shaping modes
-------------
``nyquist``
    RRC bandwidth equal to the baud rate: the signal occupies its minimum
    ISI-free width and every spectral component is unique.
``cyclic``
    The zero-interleaved signal is resampled to twice the grid width and
    filtered by an RRC as wide as the grid.  Because the RZ spectrum is
    periodic in frequency with period equal to the baud rate, the grid-wide
    filter admits repeated copies of the band-edge content: the guard band
    is filled with redundant data that a receiver-side adaptive equalizer
    can combine coherently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dspcore import (
    ComplexWaveform,
    DualPolWaveform,
    apply_filter,
    delay,
    design_rrc,
    frequency_shift,
    resample,
    rng_stream,
)
from .errors import ParameterError

__all__ = [
    "QPSK_GRAY",
    "map_qpsk",
    "demap_qpsk",
    "SymbolFrame",
    "TxChannelConfig",
    "BandConfig",
    "generate_frame",
    "shape_channel",
    "multiplex_band",
    "emulate_polmux",
]

# Gray map, bit pair (b0, b1) -> symbol, indexed by (b0 << 1) | b1:
#   00 -> (+1+j)/sqrt2   01 -> (-1+j)/sqrt2
#   10 -> (+1-j)/sqrt2   11 -> (-1-j)/sqrt2
QPSK_GRAY = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2.0)


def map_qpsk(bits: np.ndarray) -> np.ndarray:
    """Map a flat bit array (even length) to unit-energy Gray QPSK symbols."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 2:
        raise ParameterError("bit array length must be even")
    return QPSK_GRAY[(bits[0::2] << 1) | bits[1::2]]


def demap_qpsk(symbols: np.ndarray) -> np.ndarray:
    """Hard-decide symbols back to the flat bit array of :func:`map_qpsk`."""
    s = np.asarray(symbols)
    bits = np.empty(2 * s.size, dtype=np.uint8)
    bits[0::2] = s.imag < 0
    bits[1::2] = s.real < 0
    return bits


@dataclass
class SymbolFrame:
    """Training prefix plus payload, with the payload bit sequence."""

    training_symbols: np.ndarray
    payload_symbols: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        self.training_symbols = np.asarray(self.training_symbols, dtype=np.complex128)
        self.payload_symbols = np.asarray(self.payload_symbols, dtype=np.complex128)
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.size != 2 * self.payload_symbols.size:
            raise ParameterError("payload must carry exactly 2 bits per symbol")

    @property
    def n_training(self) -> int:
        return self.training_symbols.size

    @property
    def n_payload(self) -> int:
        return self.payload_symbols.size

    @property
    def n_total(self) -> int:
        return self.n_training + self.n_payload

    @property
    def sequence(self) -> np.ndarray:
        """Training followed by payload, as transmitted."""
        return np.concatenate([self.training_symbols, self.payload_symbols])


@dataclass
class TxChannelConfig:
    """One WDM channel: baud, shaping mode, grid slot and data seed."""

    baud_hz: float
    shaping: str = "nyquist"            # "nyquist" | "cyclic"
    roll_off: float = 0.01
    grid_hz: float = 50e9
    carrier_offset_hz: float = 0.0      # relative to band center, incl. detuning
    seed: int = 0

    def __post_init__(self):
        self.shaping = self.shaping.lower()
        if self.shaping not in ("nyquist", "cyclic"):
            raise ParameterError(f"unknown shaping mode {self.shaping!r}")
        if not 0.0 <= self.roll_off <= 1.0:
            raise ParameterError("roll_off must lie in [0, 1]")
        if self.baud_hz <= 0 or self.grid_hz <= 0:
            raise ParameterError("baud_hz and grid_hz must be positive")
        if self.baud_hz > self.grid_hz:
            raise ParameterError(
                f"baud {self.baud_hz} exceeds grid {self.grid_hz}: guard band < 0"
            )

    @property
    def guard_fraction(self) -> float:
        """Unused fraction of the slot in Nyquist mode, (grid - baud)/grid."""
        return (self.grid_hz - self.baud_hz) / self.grid_hz


@dataclass
class BandConfig:
    """The multiplexed band: channel list and simulation rate."""

    channels: list[TxChannelConfig] = field(default_factory=list)
    band_center_thz: float = 193.075
    dac_rate_hz: float = 256e9

    def __post_init__(self):
        offs = [c.carrier_offset_hz for c in self.channels]
        if len(set(offs)) != len(offs):
            raise ParameterError("channel carriers must be distinct")


def generate_frame(seed: int, n_payload: int, n_training: int) -> SymbolFrame:
    """Deterministic pseudorandom frame: Gray-mapped payload plus training.

    Payload bits and training symbols come from independent substreams of
    the seed, so the same seed always reproduces the same frame.
    """
    if n_payload < 1 or n_training < 1:
        raise ParameterError("frame lengths must be >= 1")
    bits = rng_stream(seed, "payload-bits").integers(0, 2, 2 * n_payload, dtype=np.uint8)
    training = QPSK_GRAY[rng_stream(seed, "training").integers(0, 4, n_training)]
    return SymbolFrame(training, map_qpsk(bits), bits)


def shape_channel(
    frame: SymbolFrame, cfg: TxChannelConfig, dac_rate_hz: float | None = None
) -> ComplexWaveform:
    """Shape one channel's symbols into a unit-power baseband waveform.

    Pipeline: (1) interleave a zero after every symbol (2 Sa/symbol, 50%
    duty RZ); (2) RRC-shape at the baud width (nyquist) or resample to twice
    the grid rate and RRC-shape at the grid width (cyclic); (3) optionally
    resample to the simulation DAC rate; (4) normalize to unit average power.
    """
    seq = frame.sequence
    rz = np.zeros(2 * seq.size, dtype=np.complex128)
    rz[0::2] = seq
    w = ComplexWaveform(rz, 2.0 * cfg.baud_hz)

    if cfg.shaping == "nyquist":
        w = apply_filter(w, design_rrc(cfg.roll_off, cfg.baud_hz))
    else:
        w = resample(w, 2.0 * cfg.grid_hz)
        w = apply_filter(w, design_rrc(cfg.roll_off, cfg.grid_hz))

    if dac_rate_hz is not None and dac_rate_hz != w.sample_rate_hz:
        w = resample(w, dac_rate_hz)
    scale = np.sqrt(np.mean(np.abs(w.samples) ** 2))
    if scale == 0.0:
        raise ParameterError("shaped waveform has zero power")
    return ComplexWaveform(w.samples / scale, w.sample_rate_hz)


def multiplex_band(waveforms: list[ComplexWaveform], cfg: BandConfig) -> ComplexWaveform:
    """Shift each channel to its carrier offset and sum.

    All waveforms must share the simulation sample rate, and the rate must
    cover the occupied band span plus slot edges.
    """
    if len(waveforms) != len(cfg.channels):
        raise ParameterError("one waveform per configured channel required")
    if len(waveforms) == 0:
        raise ParameterError("band needs at least one channel")
    fs = waveforms[0].sample_rate_hz
    n = len(waveforms[0])
    for w in waveforms[1:]:
        if w.sample_rate_hz != fs or len(w) != n:
            raise ParameterError("channel waveforms must share rate and length")
    for ch in cfg.channels:
        edge = abs(ch.carrier_offset_hz) + 0.5 * ch.grid_hz
        if edge > 0.5 * fs:
            raise ParameterError(
                f"sample rate {fs:.3g} Hz too low for a channel at "
                f"{ch.carrier_offset_hz:.3g} Hz (band edge {edge:.3g} Hz)"
            )
    acc = np.zeros(n, dtype=np.complex128)
    for w, ch in zip(waveforms, cfg.channels):
        if ch.carrier_offset_hz == 0.0:
            acc += w.samples
        else:
            acc += frequency_shift(w, ch.carrier_offset_hz).samples
    return ComplexWaveform(acc, fs)


def emulate_polmux(
    w: ComplexWaveform,
    decorrelation_symbols: int,
    baud_hz: float,
    equalizer_memory_symbols: int = 81,
) -> DualPolWaveform:
    """Emulate polarization multiplexing by delay decorrelation.

    Y carries the same field delayed by ``decorrelation_symbols`` symbol
    periods; both are scaled by 1/sqrt(2) so total power is preserved.  A
    delay shorter than the equalizer memory leaves the tributaries
    correlated within the butterfly span and is flagged with a warning.
    """
    if decorrelation_symbols < 0:
        raise ParameterError("decorrelation must be >= 0 symbols")
    if decorrelation_symbols < equalizer_memory_symbols:
        warnings.warn(
            f"polarization decorrelation of {decorrelation_symbols} symbols is "
            f"shorter than the equalizer memory ({equalizer_memory_symbols}); "
            "tributaries will be correlated within the butterfly span",
            stacklevel=2,
        )
    scale = 1.0 / np.sqrt(2.0)
    x = ComplexWaveform(w.samples * scale, w.sample_rate_hz)
    y = delay(w, decorrelation_symbols / baud_hz)
    y = ComplexWaveform(y.samples * scale, y.sample_rate_hz)
    return DualPolWaveform(x, y)
