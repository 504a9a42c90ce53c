"""Sample-domain primitives shared by every other module.

Waveform containers, frequency-domain filtering, exact rational resampling,
linear-phase delays and Welch power-spectral-density estimation.  All
filtering here is circular (whole-record FFT): records are long and metrics
discard boundary symbols, so wrap-around is harmless and the operations are
exact for periodic test signals.

Randomness: every stochastic operation in the package draws from a generator
built by :func:`rng_stream`, which derives an independent substream from a
single 64-bit run seed plus a purpose tag.  Runs are bit-reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal as sp_signal

from .errors import ParameterError

__all__ = [
    "ComplexWaveform",
    "DualPolWaveform",
    "FrequencyResponse",
    "design_rrc",
    "apply_filter",
    "resample",
    "delay",
    "frequency_shift",
    "estimate_psd",
    "rng_stream",
    "child_seed",
]


def rng_stream(seed: int, tag: str) -> np.random.Generator:
    """Independent generator derived from a run seed and a purpose tag.

    The tag is hashed so that streams for different purposes ("noise",
    "payload-bits", ...) never collide regardless of call order.
    """
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & (2**64 - 1), int.from_bytes(digest, "little")])
    )


def child_seed(seed: int, tag: str) -> int:
    """Deterministic 63-bit child seed for a named sub-simulation."""
    payload = f"{int(seed)}:{tag}".encode("utf-8")
    return int.from_bytes(hashlib.blake2s(payload, digest_size=8).digest(), "little") >> 1


@dataclass
class ComplexWaveform:
    """Uniformly sampled complex baseband field for one polarization.

    Parameters
    ----------
    samples : ndarray
        Complex field samples (linear units, dimensionless).
    sample_rate_hz : float
        Sampling rate, finite and positive.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ParameterError("waveform must be a non-empty 1-D sample array")
        rate = float(self.sample_rate_hz)
        if not np.isfinite(rate) or rate <= 0:
            raise ParameterError(f"sample_rate_hz must be finite and > 0, got {rate}")
        self.sample_rate_hz = rate
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ParameterError("waveform contains NaN or Inf samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def power(self) -> float:
        """Mean |s|^2 over the record."""
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def copy(self) -> "ComplexWaveform":
        return ComplexWaveform(self.samples.copy(), self.sample_rate_hz)


@dataclass
class DualPolWaveform:
    """X/Y polarization pair sharing one sample clock."""

    x: ComplexWaveform
    y: ComplexWaveform

    def __post_init__(self):
        if self.x.sample_rate_hz != self.y.sample_rate_hz:
            raise ParameterError("polarizations must share one sample rate")
        if len(self.x) != len(self.y):
            raise ParameterError("polarizations must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def sample_rate_hz(self) -> float:
        return self.x.sample_rate_hz

    @property
    def power(self) -> float:
        """Total mean power summed over both polarizations."""
        return self.x.power + self.y.power

    def copy(self) -> "DualPolWaveform":
        return DualPolWaveform(self.x.copy(), self.y.copy())

    def map(self, fn: Callable[[ComplexWaveform], ComplexWaveform]) -> "DualPolWaveform":
        """Apply the same per-polarization transform to X and Y."""
        return DualPolWaveform(fn(self.x), fn(self.y))


@dataclass
class FrequencyResponse:
    """Complex gain vs baseband frequency, evaluated lazily on FFT bins."""

    center_offset_hz: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, f_hz: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(f_hz, dtype=float)))


def design_rrc(roll_off: float, bandwidth_hz: float) -> FrequencyResponse:
    """Root-raised-cosine amplitude response with zero phase.

    ``bandwidth_hz`` is the two-sided passband width B (symbol-rate
    equivalent): |H| = 1 for |f| <= B(1-beta)/2, a raised-cosine-root taper
    across the transition band, 0 for |f| >= B(1+beta)/2.  The half-power
    point sits exactly at |f| = B/2 for every roll-off, including the
    brick-wall limit beta = 0.
    """
    beta = float(roll_off)
    bw = float(bandwidth_hz)
    if not np.isfinite(beta) or not 0.0 <= beta <= 1.0:
        raise ParameterError(f"roll_off must lie in [0, 1], got {roll_off}")
    if not np.isfinite(bw) or bw <= 0.0:
        raise ParameterError(f"bandwidth_hz must be finite and > 0, got {bandwidth_hz}")

    f_lo = 0.5 * bw * (1.0 - beta)
    f_hi = 0.5 * bw * (1.0 + beta)

    def evaluator(f: np.ndarray) -> np.ndarray:
        af = np.abs(f)
        h = np.zeros_like(af)
        h[af <= f_lo] = 1.0
        if beta > 0.0:
            band = (af > f_lo) & (af < f_hi)
            h[band] = np.sqrt(
                0.5 * (1.0 + np.cos(np.pi * (af[band] - f_lo) / (beta * bw)))
            )
        else:
            h[af == f_lo] = np.sqrt(0.5)
        return h

    return FrequencyResponse(center_offset_hz=0.0, evaluator=evaluator)


def apply_filter(w: ComplexWaveform, h: FrequencyResponse) -> ComplexWaveform:
    """Filter a waveform by a frequency response (circular convolution).

    The response is sampled on the record's FFT bins, so the operation is
    exact for the periodic extension of the record; length and sample rate
    are preserved.
    """
    freqs = np.fft.fftfreq(len(w), d=1.0 / w.sample_rate_hz)
    gain = h(freqs)
    if not np.all(np.isfinite(np.abs(gain))):
        raise ParameterError("frequency response is not finite over the record band")
    out = np.fft.ifft(np.fft.fft(w.samples) * gain)
    return ComplexWaveform(out, w.sample_rate_hz)


def resample(w: ComplexWaveform, new_rate_hz: float) -> ComplexWaveform:
    """Exact band-limited rate conversion via spectrum zero-pad/truncation.

    The record duration is kept, so the new sample count
    ``n * new_rate / old_rate`` must be an integer (ratio rational with a
    denominator dividing the record length); otherwise a
    :class:`ParameterError` is raised.  Upsampling preserves the spectrum
    exactly within the original Nyquist band; downsampling truncates to the
    new band, folding the edge bins.
    """
    new_rate = float(new_rate_hz)
    if not np.isfinite(new_rate) or new_rate <= 0:
        raise ParameterError(f"new_rate_hz must be finite and > 0, got {new_rate_hz}")
    if new_rate == w.sample_rate_hz:
        return w.copy()

    n = len(w)
    m_exact = n * new_rate / w.sample_rate_hz
    m = int(round(m_exact))
    if m < 1 or abs(m - m_exact) > 1e-6:
        raise ParameterError(
            f"rate ratio {new_rate}/{w.sample_rate_hz} not representable on a "
            f"{n}-sample record (needs duration * new_rate integral)"
        )

    spec = np.fft.fft(w.samples)
    out = np.zeros(m, dtype=np.complex128)
    if m > n:
        pos = (n + 1) // 2              # bins 0 .. pos-1
        neg = n - pos                   # bins pos .. n-1 (Nyquist first if n even)
        out[:pos] = spec[:pos]
        out[m - neg :] = spec[pos:]
        if n % 2 == 0:
            # split the shared +-Nyquist bin symmetrically
            v = 0.5 * spec[n // 2]
            out[m - neg] = v
            out[n // 2] += v
    else:
        pos = (m + 1) // 2
        neg = m - pos
        out[:pos] = spec[:pos]
        out[pos:] = spec[n - neg :]
        if m % 2 == 0:
            out[m // 2] += spec[m // 2]  # fold +Nyquist onto -Nyquist
    out = np.fft.ifft(out) * (m / n)
    return ComplexWaveform(out, new_rate)


def delay(w: ComplexWaveform, delay_s: float) -> ComplexWaveform:
    """Circular delay via linear-phase multiplication (fractional OK)."""
    tau = float(delay_s)
    if not np.isfinite(tau):
        raise ParameterError("delay must be finite")
    if abs(tau) >= w.duration_s:
        raise ParameterError(
            f"|delay| = {abs(tau):.3e} s exceeds the record duration "
            f"{w.duration_s:.3e} s"
        )
    if tau == 0.0:
        return w.copy()
    freqs = np.fft.fftfreq(len(w), d=1.0 / w.sample_rate_hz)
    out = np.fft.ifft(np.fft.fft(w.samples) * np.exp(-2j * np.pi * freqs * tau))
    return ComplexWaveform(out, w.sample_rate_hz)


def frequency_shift(
    w: ComplexWaveform, offset_hz: float, strict: bool = True
) -> ComplexWaveform:
    """Multiply by ``exp(+j 2 pi offset t)``.

    With ``strict=True`` the shift must complete an integer number of cycles
    over the record, which keeps the record exactly circular.  Estimator
    corrections (arbitrary offsets) pass ``strict=False``; the resulting
    wrap discontinuity is confined to the record boundary, which metrics
    discard.
    """
    off = float(offset_hz)
    if not np.isfinite(off):
        raise ParameterError("offset must be finite")
    if off == 0.0:
        return w.copy()
    cycles = off * w.duration_s
    if strict and abs(cycles - round(cycles)) > 1e-6:
        raise ParameterError(
            f"shift of {off} Hz is not commensurate with the record duration "
            f"({cycles} cycles); adjust the record length or offsets"
        )
    t = np.arange(len(w)) / w.sample_rate_hz
    return ComplexWaveform(w.samples * np.exp(2j * np.pi * off * t), w.sample_rate_hz)


def estimate_psd(w: ComplexWaveform, rbw_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Welch-averaged two-sided power spectral density.

    Parameters
    ----------
    rbw_hz : float
        Target resolution (bin spacing); must be at least
        ``sample_rate / record_length``.

    Returns
    -------
    (f_hz, density) : pair of ndarrays
        Frequencies in ascending order and density in power/Hz.  The
        integral of the density over the full band equals the mean record
        power (Hann window, density scaling).
    """
    rbw = float(rbw_hz)
    fs = w.sample_rate_hz
    if not np.isfinite(rbw) or rbw <= 0:
        raise ParameterError("rbw_hz must be finite and > 0")
    if rbw < fs / len(w):
        raise ParameterError(
            f"rbw {rbw:.3e} Hz finer than record resolution {fs / len(w):.3e} Hz"
        )
    nperseg = min(len(w), max(8, int(round(fs / rbw))))
    freqs, dens = sp_signal.welch(
        w.samples,
        fs=fs,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    return np.fft.fftshift(freqs), np.fft.fftshift(dens)
