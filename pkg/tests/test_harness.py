import math
import subprocess
import sys
from dataclasses import replace

import pytest

from cycwdm.config import ExperimentConfig, default_config, load_config
from cycwdm.errors import ConfigError, ParameterError
from cycwdm.harness import (
    CSV_HEADER,
    ResultRow,
    emit_results,
    frame_geometry,
    nodes_reached_table,
    required_osnr_table,
    run_back_to_back,
)


def tiny_cfg(**over):
    base = dict(
        kind="b2b",
        bauds_hz=[40e9],
        modes=["nyquist"],
        osnr_grid_db=[14.0, 16.0],
        n_symbols=2**14,
        n_seeds=1,
        training_symbols=1024,
        guard_symbols=256,
    )
    base.update(over)
    return replace(default_config(), **base)


class TestConfigFile:
    def test_defaults_without_file_sections(self, tmp_path):
        p = tmp_path / "empty.ini"
        p.write_text("[experiment]\n")
        cfg = load_config(str(p))
        assert cfg.kind == "b2b"
        assert cfg.bauds_hz == [40e9, 42.5e9, 45e9, 47.5e9]
        assert cfg.n_taps == 81

    def test_overrides(self, tmp_path):
        p = tmp_path / "cfg.ini"
        p.write_text(
            "[experiment]\n"
            "kind = detuning\n"
            "baud_gbd = 40, 45\n"
            "n_seeds = 2\n"
            "[rxdsp]\n"
            "n_taps = 41\n"
            "training_symbols = 1024\n"
        )
        cfg = load_config(str(p))
        assert cfg.kind == "detuning"
        assert cfg.bauds_hz == [40e9, 45e9]
        assert cfg.n_taps == 41

    def test_unknown_key_fails_fast(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[experiment]\nbogus_key = 1\n")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_unknown_section_fails_fast(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[nonsense]\nx = 1\n")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/does/not/exist.ini")

    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="nope")
        with pytest.raises(ConfigError):
            ExperimentConfig(n_symbols=1000)

    def test_hash_stable_and_sensitive(self):
        a, b = default_config(), default_config()
        assert a.config_hash() == b.config_hash()
        c = replace(a, n_symbols=2**15)
        assert c.config_hash() != a.config_hash()

    def test_smoke_profile(self):
        s = default_config().smoke()
        assert s.n_symbols == 2**14
        assert s.n_seeds == 1
        assert len(s.osnr_grid_db) == 2


class TestFrameGeometry:
    @pytest.mark.parametrize("baud", [40e9, 42.5e9, 45e9, 47.5e9])
    def test_record_is_commensurate(self, baud):
        cfg = default_config()
        n_pay, n_tr = frame_geometry(cfg, baud, detuning_hz=1e9)
        n_frame = n_pay + n_tr
        duration = n_frame / baud
        for rate in (2 * baud, 2 * cfg.grid_hz, cfg.dac_rate_hz):
            assert (duration * rate) == pytest.approx(round(duration * rate), abs=1e-6)
        for off in (25e9, 75e9, 1e9):
            cycles = duration * off
            assert cycles == pytest.approx(round(cycles), abs=1e-6)

    def test_close_to_requested_size(self):
        cfg = default_config()
        for baud in cfg.bauds_hz:
            n_pay, n_tr = frame_geometry(cfg, baud)
            assert abs(n_pay - cfg.n_symbols) / cfg.n_symbols < 0.01


def make_row(i, ber=1e-3, seed=1, osnr=14.0):
    from cycwdm.metrics import ber_to_q2_db

    return ResultRow(
        experiment="b2b", baud_hz=40e9, mode="nyquist", osnr_db=osnr,
        psd_ratio_db=osnr - 5.05, detuning_hz=0.0, pass_index=0,
        ber=ber, q2_db=ber_to_q2_db(ber), seed=seed, config_hash="abc123",
    )


class TestEmitResults:
    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ParameterError):
            emit_results([], str(tmp_path / "x.csv"))

    def test_single_row_file(self, tmp_path):
        path = tmp_path / "one.csv"
        emit_results([make_row(0)], str(path))
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == CSV_HEADER
        assert lines[1].startswith("b2b,40,nyquist,14,")

    def test_row_order_canonical(self, tmp_path):
        rows = [make_row(0, seed=2), make_row(0, seed=1), make_row(0, osnr=13.0, seed=9)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_results(rows, str(p1))
        emit_results(list(reversed(rows)), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_six_significant_digits(self, tmp_path):
        path = tmp_path / "fmt.csv"
        emit_results([make_row(0, ber=1.2345678e-3)], str(path))
        assert "0.00123457" in path.read_text()

    def test_unwritable_path(self):
        with pytest.raises(ParameterError):
            emit_results([make_row(0)], "/nonexistent-dir/x.csv")


class TestRunnersSmall:
    def test_back_to_back_rows_and_summaries(self):
        cfg = tiny_cfg(osnr_grid_db=[13.0, 15.0, 17.0])
        rows = run_back_to_back(cfg)
        assert len(rows) == 3
        assert all(r.error is None for r in rows)
        bers = [r.ber for r in rows]
        assert bers == sorted(bers, reverse=True)  # BER falls with OSNR
        table = required_osnr_table(rows)
        req = table[(40e9, "nyquist")]
        assert 13.0 < req < 17.0

    def test_noiseless_control_row(self):
        cfg = tiny_cfg(osnr_grid_db=[math.inf])
        rows = run_back_to_back(cfg)
        assert rows[0].ber == 0.0
        assert math.isinf(rows[0].q2_db)

    def test_determinism_byte_identical(self, tmp_path):
        cfg = tiny_cfg(osnr_grid_db=[14.0])
        p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        emit_results(run_back_to_back(cfg), str(p1))
        emit_results(run_back_to_back(cfg), str(p2))
        assert p1.read_bytes() == p2.read_bytes()


class TestCli:
    def _write_cfg(self, tmp_path):
        p = tmp_path / "run.ini"
        p.write_text(
            "[experiment]\n"
            "kind = b2b\n"
            "baud_gbd = 40\n"
            "modes = nyquist\n"
            "osnr_grid_db = 14, 16\n"
            "n_symbols = 16384\n"
            "n_seeds = 1\n"
            "[rxdsp]\n"
            "training_symbols = 1024\n"
            "guard_symbols = 256\n"
        )
        return p

    def test_cli_success_exit_zero(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        out = tmp_path / "results.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "cycwdm.cli", str(cfg), "--out", str(out)],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        assert "required OSNR" in proc.stdout

    def test_cli_config_error_exit_two(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nwrong = 1\n")
        proc = subprocess.run(
            [sys.executable, "-m", "cycwdm.cli", str(bad)],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 2

    def test_cli_missing_config_exit_two(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "cycwdm.cli", str(tmp_path / "nope.ini")],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 2

    def test_cli_gnuplot_output(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        gdir = tmp_path / "plots"
        proc = subprocess.run(
            [sys.executable, "-m", "cycwdm.cli", str(cfg),
             "--out", str(tmp_path / "r.csv"), "--gnuplot", str(gdir)],
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        dats = list(gdir.glob("*.dat"))
        assert len(dats) == 1
        assert dats[0].read_text().startswith("# osnr_db")
