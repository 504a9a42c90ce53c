"""Command line harness.

Usage::

    simulate <config-path> [--experiment b2b|detuning|multipass]
             [--out results.csv] [--seeds N] [--smoke] [--gnuplot DIR]

Exit codes: 0 success, 2 config error, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

from .config import load_config
from .errors import ConfigError, CycwdmError
from .harness import (
    emit_results,
    nodes_reached_table,
    required_osnr_table,
    run_experiment,
)
from .metrics import HD_FEC, psd_ratio_db


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Nyquist vs cyclic-spectrum WDM link simulation harness",
    )
    p.add_argument("config", help="path to the INI experiment config")
    p.add_argument(
        "--experiment",
        choices=("b2b", "detuning", "multipass"),
        help="override the experiment family from the config",
    )
    p.add_argument("--out", default="results.csv", help="output CSV path")
    p.add_argument("--seeds", type=int, help="override the number of seeds")
    p.add_argument(
        "--smoke",
        action="store_true",
        help="reduced profile: 2^14 symbols, 1 seed, 2 OSNR points",
    )
    p.add_argument(
        "--gnuplot",
        metavar="DIR",
        help="also write whitespace-separated .dat files per (baud, mode)",
    )
    return p


def _print_summaries(kind: str, rows, ref_bw_hz: float, grid_hz: float) -> None:
    if kind == "b2b":
        try:
            table = required_osnr_table(rows)
        except CycwdmError as exc:
            print(f"required-OSNR summary unavailable: {exc}")
            return
        print(f"required OSNR at Q^2 = {HD_FEC.q2_db} dB ({HD_FEC.name}):")
        for (baud, mode), req in sorted(table.items()):
            bw = baud if mode == "nyquist" else grid_hz
            print(
                f"  {baud / 1e9:6.1f} Gbd {mode:8s}: OSNR {req:6.2f} dB, "
                f"PSD ratio {psd_ratio_db(req, bw, ref_bw_hz):6.2f} dB"
            )
    elif kind == "multipass":
        table = nodes_reached_table(rows)
        print("nodes reached (seed-averaged per-pass Q^2 vs threshold):")
        for (baud, mode), n in sorted(table.items()):
            print(f"  {baud / 1e9:6.1f} Gbd {mode:8s}: {n}")


def _write_gnuplot(rows, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.experiment, r.baud_hz, r.mode), []).append(r)
    for (exp, baud, mode), grp in sorted(groups.items()):
        name = f"{exp}_{baud / 1e9:g}gbd_{mode}.dat"
        with open(os.path.join(directory, name), "w", encoding="utf-8") as fh:
            fh.write("# osnr_db psd_ratio_db detuning_ghz pass_index ber q2_db\n")
            for r in sorted(grp, key=lambda r: (r.osnr_db, r.detuning_hz, r.pass_index, r.seed)):
                fh.write(
                    f"{r.osnr_db:.6g} {r.psd_ratio_db:.6g} {r.detuning_hz / 1e9:.6g} "
                    f"{r.pass_index} {r.ber:.6g} {r.q2_db:.6g}\n"
                )


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.experiment:
            cfg = replace(cfg, kind=args.experiment)
        if args.seeds is not None:
            cfg = replace(cfg, n_seeds=args.seeds)
        if args.smoke:
            cfg = cfg.smoke()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        rows = run_experiment(cfg)
        emit_results(rows, args.out)
        if args.gnuplot:
            _write_gnuplot(rows, args.gnuplot)
    except CycwdmError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3

    failed = [r for r in rows if r.error is not None or math.isnan(r.ber)]
    print(f"wrote {len(rows)} rows to {args.out} (config {cfg.config_hash()})")
    _print_summaries(cfg.kind, rows, cfg.ref_bw_hz, cfg.grid_hz)
    if failed:
        print(f"{len(failed)} rows failed; causes were logged", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
