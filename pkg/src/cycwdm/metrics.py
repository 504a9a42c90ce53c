"""Quality metrics: BER <-> Q^2 conversion, OSNR axes, threshold analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.special import erfc, erfcinv

from .errors import ParameterError, ThresholdRangeError

__all__ = [
    "FecThreshold",
    "HD_FEC",
    "QualityReport",
    "ber_to_q2_db",
    "q2_db_to_ber",
    "psd_ratio_db",
    "required_osnr",
    "nodes_reached",
]


@dataclass(frozen=True)
class FecThreshold:
    """Pre-correction quality threshold for hard-decision FEC."""

    q2_db: float = 8.56
    name: str = "7% HD-FEC"


HD_FEC = FecThreshold()


def ber_to_q2_db(ber: float) -> float:
    """Convert a bit error rate to the Gaussian Q^2 factor in dB.

    Q = sqrt(2) * erfcinv(2 * BER), Q^2(dB) = 20 log10 Q.  Strictly
    decreasing in BER; defined on the open interval (0, 0.5).
    """
    b = float(ber)
    if not 0.0 < b < 0.5:
        raise ParameterError(f"ber must lie in (0, 0.5), got {ber}")
    q = math.sqrt(2.0) * float(erfcinv(2.0 * b))
    return 20.0 * math.log10(q)


def q2_db_to_ber(q2_db: float) -> float:
    """Inverse of :func:`ber_to_q2_db`."""
    q = 10.0 ** (float(q2_db) / 20.0)
    return 0.5 * float(erfc(q / math.sqrt(2.0)))


def psd_ratio_db(osnr_db: float, signal_bw_hz: float, ref_bw_hz: float = 12.5e9) -> float:
    """Signal-to-noise power-spectral-density ratio implied by an OSNR.

    ``signal_bw_hz`` is the bandwidth over which the signal power is spread
    (baud for Nyquist shaping, the grid width for cyclic spectra).
    """
    if signal_bw_hz <= 0 or ref_bw_hz <= 0:
        raise ParameterError("bandwidths must be positive")
    return float(osnr_db) - 10.0 * math.log10(signal_bw_hz / ref_bw_hz)


@dataclass
class QualityReport:
    """One measured operating point of one channel."""

    baud_hz: float
    mode: str
    osnr_db: float
    psd_ratio_db: float
    detuning_hz: float
    pass_index: int
    ber: float
    q2_db: float = field(default=None)  # type: ignore[assignment]
    seed: int = 0

    def __post_init__(self):
        if self.q2_db is None:
            self.q2_db = ber_to_q2_db(self.ber) if 0.0 < self.ber < 0.5 else math.inf
        if 0.0 < self.ber < 0.5 and math.isfinite(self.q2_db):
            if abs(ber_to_q2_db(self.ber) - self.q2_db) > 0.01:
                raise ParameterError("q2_db inconsistent with ber")


def required_osnr(curve: list[tuple[float, float]], threshold: FecThreshold = HD_FEC) -> float:
    """OSNR at which a measured (osnr_db, q2_db) curve crosses the threshold.

    Linear interpolation between the two points straddling ``threshold.q2_db``.
    Raises :class:`ThresholdRangeError` when no adjacent pair straddles it.
    """
    pts = sorted((float(o), float(q)) for o, q in curve if math.isfinite(q))
    if len(pts) < 2:
        raise ThresholdRangeError("curve needs at least two finite points")
    thr = threshold.q2_db
    for (o0, q0), (o1, q1) in zip(pts, pts[1:]):
        if q0 == thr:
            return o0
        if q1 == thr:
            return o1
        if (q0 - thr) * (q1 - thr) < 0:
            return o0 + (o1 - o0) * (thr - q0) / (q1 - q0)
    raise ThresholdRangeError(
        f"curve does not straddle Q^2 = {thr} dB "
        f"(range {min(q for _, q in pts):.2f}..{max(q for _, q in pts):.2f} dB)"
    )


def nodes_reached(per_pass_q2: list[float], threshold: FecThreshold = HD_FEC) -> int:
    """Largest k such that every pass up to k stays at or above threshold."""
    if len(per_pass_q2) == 0:
        raise ParameterError("per_pass_q2 must be nonempty")
    n = 0
    for q2 in per_pass_q2:
        if not (q2 >= threshold.q2_db):
            break
        n += 1
    return n
