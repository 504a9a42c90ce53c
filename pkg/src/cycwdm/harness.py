"""Experiment orchestration: the three measurement families and CSV output.

Families
--------
* back-to-back: OSNR sweep, no link, required-OSNR summary per (baud, mode)
* detuning: one span + one add/drop node, target carrier swept off-grid
* multipass: recirculating span + node, per-pass quality and nodes reached

Rows are deterministic functions of (config, seed); output rows are sorted
canonically before emission so identical configs yield byte-identical CSVs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import NodeConfig, load_noise, run_link
from .config import ExperimentConfig
from .dspcore import DualPolWaveform, child_seed, rng_stream
from .errors import CycwdmError, ParameterError
from .metrics import HD_FEC, ber_to_q2_db, nodes_reached, psd_ratio_db, required_osnr
from .rxdsp import receive_channel
from .txgen import (
    BandConfig,
    SymbolFrame,
    TxChannelConfig,
    emulate_polmux,
    generate_frame,
    multiplex_band,
    shape_channel,
)

__all__ = [
    "ResultRow",
    "build_band",
    "run_back_to_back",
    "run_detuning",
    "run_multipass",
    "run_experiment",
    "emit_results",
    "required_osnr_table",
    "nodes_reached_table",
]

log = logging.getLogger("cycwdm")

CSV_HEADER = (
    "experiment,baud_gbd,mode,osnr_db,psd_ratio_db,detuning_ghz,"
    "pass_index,ber,q2_db,seed,config_hash"
)

# Default four-channel comb relative to band center: odd-even structure on
# the 50-GHz grid; the add/drop target is the +25 GHz slot (193.100 THz for
# a 193.075-THz band center).
CHANNEL_OFFSETS_HZ = (-75e9, -25e9, 25e9, 75e9)
TARGET_CHANNEL = 2


@dataclass
class ResultRow:
    """One simulated operating point, as emitted to CSV."""

    experiment: str
    baud_hz: float
    mode: str
    osnr_db: float
    psd_ratio_db: float
    detuning_hz: float
    pass_index: int
    ber: float
    q2_db: float
    seed: int
    config_hash: str
    error: str | None = None  # failure cause, logged but not emitted


def _max_prime_factor(n: int) -> int:
    largest = 1
    d = 2
    while d * d <= n:
        while n % d == 0:
            largest = d
            n //= d
        d += 1
    return max(largest, n) if n > 1 else largest


def _snap_duration_units(target_units: float) -> int:
    """Pick a record duration (in commensuration units) with smooth factors.

    FFT lengths scale with this count, so among durations within a small
    window of the target the one with the smallest largest-prime-factor is
    chosen (ties resolved toward the target).
    """
    base = max(1, int(round(target_units)))
    best = None
    for k in range(max(1, base - 8), base + 9):
        score = (_max_prime_factor(k), abs(k - base))
        if best is None or score < best[0]:
            best = (score, k)
    return best[1]


def _commensuration_unit_hz(cfg: ExperimentConfig, baud_hz: float, detuning_hz: float) -> int:
    """gcd of every rate and carrier offset in play, in Hz.

    Record durations are snapped to an integer number of 1/unit periods so
    that all resamplings and carrier shifts are exact on the circular record.
    """
    values = [baud_hz, 2 * baud_hz, cfg.grid_hz, 2 * cfg.grid_hz, cfg.dac_rate_hz]
    for off in CHANNEL_OFFSETS_HZ:
        values.append(abs(off))
    if detuning_hz:
        values.append(abs(detuning_hz))
    ints = []
    for v in values:
        iv = int(round(v))
        if abs(v - iv) > 1e-3 or iv <= 0:
            raise ParameterError(f"rate/offset {v} Hz is not an integer frequency")
        ints.append(iv)
    return math.gcd(*ints)


def frame_geometry(
    cfg: ExperimentConfig, baud_hz: float, detuning_hz: float = 0.0
) -> tuple[int, int]:
    """(n_payload, n_training) snapped to the commensurate record duration."""
    unit = _commensuration_unit_hz(cfg, baud_hz, detuning_hz)
    symbols_per_unit = int(round(baud_hz)) // unit
    target = (cfg.n_symbols + cfg.training_symbols) / symbols_per_unit
    k = _snap_duration_units(target)
    n_frame = k * symbols_per_unit
    n_payload = n_frame - cfg.training_symbols
    if n_payload < 1:
        raise ParameterError("record too short for the training prefix")
    return n_payload, cfg.training_symbols


def build_band(
    cfg: ExperimentConfig,
    baud_hz: float,
    mode: str,
    seed: int,
    detuning_hz: float = 0.0,
) -> tuple[DualPolWaveform, SymbolFrame]:
    """Generate the four-channel polarization-multiplexed band.

    All channels run the same baud and shaping mode with independent data
    seeds; only the target channel's carrier is moved by ``detuning_hz``.
    Returns the band (before noise loading) and the target channel's frame.
    """
    n_payload, n_training = frame_geometry(cfg, baud_hz, detuning_hz)
    channels = []
    frames = []
    for i, off in enumerate(CHANNEL_OFFSETS_HZ):
        ch_seed = child_seed(seed, f"channel-{i}")
        carrier = off + (detuning_hz if i == TARGET_CHANNEL else 0.0)
        channels.append(
            TxChannelConfig(
                baud_hz=baud_hz,
                shaping=mode,
                roll_off=cfg.roll_off,
                grid_hz=cfg.grid_hz,
                carrier_offset_hz=carrier,
                seed=ch_seed,
            )
        )
        frames.append(generate_frame(ch_seed, n_payload, n_training))
    band_cfg = BandConfig(
        channels=channels,
        band_center_thz=cfg.band_center_thz,
        dac_rate_hz=cfg.dac_rate_hz,
    )
    shaped = [
        shape_channel(frame, ch, dac_rate_hz=cfg.dac_rate_hz)
        for frame, ch in zip(frames, channels)
    ]
    field = multiplex_band(shaped, band_cfg)
    band = emulate_polmux(
        field,
        cfg.pol_decorrelation_symbols,
        baud_hz,
        equalizer_memory_symbols=cfg.n_taps,
    )
    return band, frames[TARGET_CHANNEL]


def _mode_bandwidth(cfg: ExperimentConfig, baud_hz: float, mode: str) -> float:
    return baud_hz if mode == "nyquist" else cfg.grid_hz


def _row(
    cfg: ExperimentConfig,
    experiment: str,
    baud_hz: float,
    mode: str,
    osnr_db: float,
    detuning_hz: float,
    pass_index: int,
    seed: int,
    ber: float | None,
    error: str | None = None,
) -> ResultRow:
    if ber is None or math.isnan(ber):
        ber_val, q2 = math.nan, math.nan
    elif ber <= 0.0:
        ber_val, q2 = 0.0, math.inf
    else:
        ber_val, q2 = ber, ber_to_q2_db(min(ber, 0.49999999))
    return ResultRow(
        experiment=experiment,
        baud_hz=baud_hz,
        mode=mode,
        osnr_db=osnr_db,
        psd_ratio_db=psd_ratio_db(
            osnr_db, _mode_bandwidth(cfg, baud_hz, mode), cfg.ref_bw_hz
        ),
        detuning_hz=detuning_hz,
        pass_index=pass_index,
        ber=ber_val,
        q2_db=q2,
        seed=seed,
        config_hash=cfg.config_hash(),
        error=error,
    )


def _noise_stream(seed: int, tag: str) -> np.random.Generator:
    return rng_stream(child_seed(seed, tag), "awgn")


def run_back_to_back(cfg: ExperimentConfig) -> list[ResultRow]:
    """OSNR sweep without any link, one band build per (baud, mode, seed)."""
    rows: list[ResultRow] = []
    target = CHANNEL_OFFSETS_HZ[TARGET_CHANNEL]
    for baud in cfg.bauds_hz:
        for mode in cfg.modes:
            for seed in cfg.seeds:
                band, frame = build_band(cfg, baud, mode, seed)
                for osnr in cfg.osnr_grid_db:
                    tag = f"b2b/{baud:.6g}/{mode}/{osnr:.6g}"
                    try:
                        noisy = load_noise(
                            band,
                            osnr,
                            slot_center_hz=target,
                            signal_bw_hz=cfg.grid_hz,
                            ref_bw_hz=cfg.ref_bw_hz,
                            stream=_noise_stream(seed, tag),
                        )
                        res = receive_channel(
                            noisy,
                            carrier_offset_hz=target,
                            baud_hz=baud,
                            frame=frame,
                            eq=cfg.equalizer,
                            prefilter_bw_hz=cfg.prefilter_bw_hz,
                            phase_block_len=cfg.phase_block_len,
                            guard_symbols=cfg.guard_symbols,
                        )
                        rows.append(
                            _row(cfg, "b2b", baud, mode, osnr, 0.0, 0, seed, res.ber)
                        )
                    except CycwdmError as exc:
                        log.warning("b2b row failed (%s): %s", tag, exc)
                        rows.append(
                            _row(cfg, "b2b", baud, mode, osnr, 0.0, 0, seed, None, str(exc))
                        )
    return rows


def _node_for(cfg: ExperimentConfig, baud_hz: float, mode: str) -> NodeConfig:
    target = CHANNEL_OFFSETS_HZ[TARGET_CHANNEL]
    return NodeConfig(
        mode=mode,
        target_center_hz=target if mode == "adddrop" else None,
        drop_filter=cfg.wss,
        express_delay_s=cfg.express_delay_symbols / baud_hz,
    )


def run_detuning(cfg: ExperimentConfig) -> list[ResultRow]:
    """Single span + single on-grid add/drop node, carrier swept off-grid."""
    rows: list[ResultRow] = []
    target = CHANNEL_OFFSETS_HZ[TARGET_CHANNEL]
    osnr = cfg.detuning_osnr_db
    for baud in cfg.bauds_hz:
        node = _node_for(cfg, baud, "adddrop")
        for mode in cfg.modes:
            for det in cfg.detuning_grid_hz:
                for seed in cfg.seeds:
                    tag = f"det/{baud:.6g}/{mode}/{det:.6g}"
                    try:
                        band, frame = build_band(cfg, baud, mode, seed, detuning_hz=det)
                        noisy = load_noise(
                            band,
                            osnr,
                            slot_center_hz=target + det,
                            signal_bw_hz=cfg.grid_hz,
                            ref_bw_hz=cfg.ref_bw_hz,
                            stream=_noise_stream(seed, tag),
                        )
                        state = run_link(noisy, cfg.span, node, n_passes=1)[-1]
                        res = receive_channel(
                            state,
                            carrier_offset_hz=target + det,
                            baud_hz=baud,
                            frame=frame,
                            eq=cfg.equalizer,
                            span=cfg.span,
                            n_spans=1,
                            prefilter_bw_hz=cfg.prefilter_bw_hz,
                            phase_block_len=cfg.phase_block_len,
                            guard_symbols=cfg.guard_symbols,
                        )
                        rows.append(
                            _row(cfg, "detuning", baud, mode, osnr, det, 1, seed, res.ber)
                        )
                    except CycwdmError as exc:
                        log.warning("detuning row failed (%s): %s", tag, exc)
                        rows.append(
                            _row(cfg, "detuning", baud, mode, osnr, det, 1, seed, None, str(exc))
                        )
    return rows


def run_multipass(cfg: ExperimentConfig) -> list[ResultRow]:
    """Recirculating loop: noise loaded once, quality measured every pass."""
    rows: list[ResultRow] = []
    target = CHANNEL_OFFSETS_HZ[TARGET_CHANNEL]
    for baud in cfg.bauds_hz:
        osnr = cfg.multipass_osnr_db(baud)
        node = _node_for(cfg, baud, cfg.node_mode)
        for mode in cfg.modes:
            for seed in cfg.seeds:
                tag = f"mp/{baud:.6g}/{mode}/{cfg.node_mode}"
                try:
                    band, frame = build_band(cfg, baud, mode, seed)
                    noisy = load_noise(
                        band,
                        osnr,
                        slot_center_hz=target,
                        signal_bw_hz=cfg.grid_hz,
                        ref_bw_hz=cfg.ref_bw_hz,
                        stream=_noise_stream(seed, tag),
                    )
                    states = run_link(noisy, cfg.span, node, n_passes=cfg.max_passes)
                except CycwdmError as exc:
                    log.warning("multipass band failed (%s): %s", tag, exc)
                    for p in range(1, cfg.max_passes + 1):
                        rows.append(
                            _row(cfg, "multipass", baud, mode, osnr, 0.0, p, seed, None, str(exc))
                        )
                    continue
                for p, state in enumerate(states, start=1):
                    try:
                        res = receive_channel(
                            state,
                            carrier_offset_hz=target,
                            baud_hz=baud,
                            frame=frame,
                            eq=cfg.equalizer,
                            span=cfg.span,
                            n_spans=p,
                            prefilter_bw_hz=cfg.prefilter_bw_hz,
                            phase_block_len=cfg.phase_block_len,
                            guard_symbols=cfg.guard_symbols,
                        )
                        rows.append(
                            _row(cfg, "multipass", baud, mode, osnr, 0.0, p, seed, res.ber)
                        )
                    except CycwdmError as exc:
                        log.warning("multipass row failed (%s pass %d): %s", tag, p, exc)
                        rows.append(
                            _row(cfg, "multipass", baud, mode, osnr, 0.0, p, seed, None, str(exc))
                        )
    return rows


_RUNNERS = {
    "b2b": run_back_to_back,
    "detuning": run_detuning,
    "multipass": run_multipass,
}


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    return _RUNNERS[cfg.kind](cfg)


def _fmt(value: float) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


def emit_results(rows: list[ResultRow], path: str) -> None:
    """Write the canonical CSV (sorted rows, 6 significant digits)."""
    if not rows:
        raise ParameterError("no rows to emit")

    def sort_key(r: ResultRow):
        return (
            r.experiment,
            r.baud_hz,
            r.mode,
            r.osnr_db if math.isfinite(r.osnr_db) else 1e99,
            r.detuning_hz,
            r.pass_index,
            r.seed,
        )

    lines = [CSV_HEADER]
    for r in sorted(rows, key=sort_key):
        lines.append(
            ",".join(
                [
                    r.experiment,
                    _fmt(r.baud_hz / 1e9),
                    r.mode,
                    _fmt(r.osnr_db),
                    _fmt(r.psd_ratio_db),
                    _fmt(r.detuning_hz / 1e9),
                    str(r.pass_index),
                    _fmt(r.ber),
                    _fmt(r.q2_db),
                    str(r.seed),
                    r.config_hash,
                ]
            )
        )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ParameterError(f"cannot write results to {path!r}: {exc}") from exc


def _mean_q2_curve(rows: list[ResultRow], key_fn, x_fn) -> dict:
    """Group rows, averaging Q^2 across seeds at each x."""
    acc: dict = {}
    for r in rows:
        if math.isnan(r.ber):
            continue
        acc.setdefault(key_fn(r), {}).setdefault(x_fn(r), []).append(r.q2_db)
    out = {}
    for key, by_x in acc.items():
        out[key] = sorted((x, float(np.mean(vals))) for x, vals in by_x.items())
    return out


def required_osnr_table(
    rows: list[ResultRow], threshold=HD_FEC
) -> dict[tuple[float, str], float]:
    """Required OSNR per (baud_hz, mode) from seed-averaged Q^2 curves."""
    curves = _mean_q2_curve(
        rows, key_fn=lambda r: (r.baud_hz, r.mode), x_fn=lambda r: r.osnr_db
    )
    return {key: required_osnr(curve, threshold) for key, curve in curves.items()}


def nodes_reached_table(
    rows: list[ResultRow], threshold=HD_FEC
) -> dict[tuple[float, str], int]:
    """Nodes reached per (baud_hz, mode) from seed-averaged per-pass Q^2."""
    curves = _mean_q2_curve(
        rows, key_fn=lambda r: (r.baud_hz, r.mode), x_fn=lambda r: r.pass_index
    )
    return {
        key: nodes_reached([q for _, q in curve], threshold)
        for key, curve in curves.items()
    }
