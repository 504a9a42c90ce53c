#!/usr/bin/env python3
"""Benchmark the adaptive equalizer kernels: numba @njit vs pure NumPy.

The 2x2 butterfly LMS/CMA loop is the hot path of every simulation point
(sequential over ~1e5 symbols, ~650 complex MACs per symbol).  This script
times one representative equalization with each backend and checks that the
outputs agree.

Run:  python benchmarks/bench_equalizer.py [n_payload_symbols]
"""

import os
import sys
import time

import numpy as np

from cycwdm import _kernels
from cycwdm.rxdsp import EqualizerConfig, equalize, select_channel
from cycwdm.txgen import (
    BandConfig,
    TxChannelConfig,
    emulate_polmux,
    generate_frame,
    multiplex_band,
    shape_channel,
)


def build_input(n_payload):
    baud = 40e9
    n_training = 4096
    m = 40  # commensuration multiple for 40 Gbd on the 256 GSa/s grid
    n_frame = ((n_payload + n_training) // m + 1) * m
    frame = generate_frame(17, n_frame - n_training, n_training)
    ch = TxChannelConfig(baud_hz=baud, shaping="cyclic", grid_hz=50e9,
                         carrier_offset_hz=25e9, seed=17)
    shaped = shape_channel(frame, ch, dac_rate_hz=256e9)
    field = multiplex_band([shaped], BandConfig(channels=[ch]))
    band = emulate_polmux(field, 256, baud)
    return select_channel(band, 25e9, baud_hz=baud), frame


def run(backend, w, frame, cfg):
    os.environ[_kernels.BACKEND_ENV] = backend
    t0 = time.perf_counter()
    sx, sy = equalize(w, cfg, frame)
    return time.perf_counter() - t0, sx, sy


def main():
    n_payload = int(sys.argv[1]) if len(sys.argv) > 1 else 65536
    print(f"building {n_payload}-symbol cyclic test signal ...")
    w, frame = build_input(n_payload)
    cfg = EqualizerConfig()
    print(f"equalizer: {cfg.n_taps} taps, {cfg.training_symbols} training symbols, "
          f"{frame.n_total} symbols/record, {cfg.cma_passes} CMA passes")

    # warm-up compiles the numba kernels so timing excludes compilation
    run("numba", w, frame, cfg)

    results = {}
    for backend in ("numba", "numpy"):
        dt, sx, sy = run(backend, w, frame, cfg)
        results[backend] = (dt, sx)
        rate = frame.n_total * (cfg.cma_passes + 0.1) / dt / 1e3
        print(f"{backend:6s}: {dt:7.3f} s   (~{rate:7.1f} ksymbol-steps/s)")

    speedup = results["numpy"][0] / results["numba"][0]
    agree = np.max(np.abs(results["numpy"][1] - results["numba"][1]))
    print(f"speedup: {speedup:.1f}x    max |output difference|: {agree:.2e}")


if __name__ == "__main__":
    main()
