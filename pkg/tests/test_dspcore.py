import numpy as np
import pytest

from cycwdm.dspcore import (
    ComplexWaveform,
    DualPolWaveform,
    apply_filter,
    delay,
    design_rrc,
    estimate_psd,
    frequency_shift,
    resample,
    rng_stream,
)
from cycwdm.errors import ParameterError

from conftest import tone, white_waveform


class TestWaveformContainers:
    def test_rejects_empty_and_bad_rate(self):
        with pytest.raises(ParameterError):
            ComplexWaveform(np.array([]), 1e9)
        with pytest.raises(ParameterError):
            ComplexWaveform(np.ones(4), 0.0)
        with pytest.raises(ParameterError):
            ComplexWaveform(np.array([1.0, np.nan]), 1e9)

    def test_dual_pol_requires_matching_clocks(self):
        a = ComplexWaveform(np.ones(8), 1e9)
        b = ComplexWaveform(np.ones(8), 2e9)
        with pytest.raises(ParameterError):
            DualPolWaveform(a, b)
        with pytest.raises(ParameterError):
            DualPolWaveform(a, ComplexWaveform(np.ones(4), 1e9))

    def test_power_sums_over_polarizations(self):
        a = ComplexWaveform(np.full(16, 1 + 0j), 1e9)
        d = DualPolWaveform(a, a.copy())
        assert d.power == pytest.approx(2.0)


class TestDesignRrc:
    def test_brick_wall_limit(self):
        h = design_rrc(0.0, 40e9)
        assert h(np.array([19.99e9]))[0] == pytest.approx(1.0)
        assert h(np.array([20.01e9]))[0] == 0.0

    @pytest.mark.parametrize("beta", [0.0, 0.01, 0.25, 1.0])
    def test_half_power_at_half_baud_edge(self, beta):
        h = design_rrc(beta, 40e9)
        assert abs(h(np.array([20e9]))[0]) ** 2 == pytest.approx(0.5, abs=1e-12)

    def test_one_percent_rolloff_edges(self):
        # closed-form RRC: flat to B(1-beta)/2, zero beyond B(1+beta)/2
        h = design_rrc(0.01, 40e9)
        f = np.array([0.0, 10e9, 19.8e9, 20.2e9, 25e9])
        g = np.abs(h(f))
        assert np.all(g[:3] == 1.0)
        assert np.all(g[3:] == 0.0)
        # taper midpoint from the closed form
        fm = 20e9
        expect = np.sqrt(0.5 * (1 + np.cos(np.pi * (fm - 19.8e9) / (0.01 * 40e9))))
        assert abs(h(np.array([fm]))[0]) == pytest.approx(expect, rel=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            design_rrc(-0.1, 40e9)
        with pytest.raises(ParameterError):
            design_rrc(1.5, 40e9)
        with pytest.raises(ParameterError):
            design_rrc(0.1, -1.0)


class TestApplyFilter:
    def test_identity_filter(self, rng):
        w = white_waveform(rng)
        from cycwdm.dspcore import FrequencyResponse

        ident = FrequencyResponse(0.0, lambda f: np.ones_like(f))
        out = apply_filter(w, ident)
        err = np.sqrt(np.mean(np.abs(out.samples - w.samples) ** 2))
        assert err <= 1e-12

    def test_zero_filter(self, rng):
        from cycwdm.dspcore import FrequencyResponse

        w = white_waveform(rng)
        out = apply_filter(w, FrequencyResponse(0.0, lambda f: np.zeros_like(f)))
        assert np.all(out.samples == 0)

    def test_rect_on_white_noise_suppresses_stopband(self, rng):
        from cycwdm.dspcore import FrequencyResponse

        w = white_waveform(rng, n=2**17)
        bw = 20e9
        rect = FrequencyResponse(0.0, lambda f: (np.abs(f) <= bw / 2).astype(float))
        out = apply_filter(w, rect)
        f, p = estimate_psd(out, rbw_hz=100e6)
        inband = p[np.abs(f) < 0.4 * bw]
        outband = p[np.abs(f) > 0.6 * bw]
        # >= 60 dB suppression outside the rectangle
        assert 10 * np.log10(np.mean(outband) / np.mean(inband)) < -60

    def test_parseval_for_unit_modulus_response(self, rng):
        from cycwdm.dspcore import FrequencyResponse

        w = white_waveform(rng)
        allpass = FrequencyResponse(
            0.0, lambda f: np.exp(1j * 2e-18 * f**2)
        )
        out = apply_filter(w, allpass)
        assert out.energy == pytest.approx(w.energy, rel=1e-9)


class TestResample:
    def test_same_rate_passthrough(self, rng):
        w = white_waveform(rng, n=1024)
        out = resample(w, w.sample_rate_hz)
        assert np.array_equal(out.samples, w.samples)

    def test_up_then_down_roundtrip(self, rng):
        w = white_waveform(rng, n=4096, fs=80e9)
        up = resample(w, 160e9)
        back = resample(up, 80e9)
        err = np.sqrt(np.mean(np.abs(back.samples - w.samples) ** 2))
        assert err <= 1e-6

    def test_tone_preserved_across_rates(self):
        n, fs = 16000, 80e9
        w = tone(n, fs, 10e9)
        out = resample(w, 100e9)
        spec = np.abs(np.fft.fft(out.samples))
        freqs = np.fft.fftfreq(len(out), 1 / out.sample_rate_hz)
        peak = freqs[np.argmax(spec)]
        assert peak == pytest.approx(10e9, abs=out.sample_rate_hz / len(out))
        amp_db = 20 * np.log10(np.max(spec) / len(out))
        assert abs(amp_db) <= 0.01

    def test_unrepresentable_ratio_rejected(self, rng):
        w = white_waveform(rng, n=1000)
        with pytest.raises(ParameterError):
            resample(w, w.sample_rate_hz * np.pi)


class TestDelay:
    def test_zero_delay_identity(self, rng):
        w = white_waveform(rng, n=2048)
        out = delay(w, 0.0)
        err = np.sqrt(np.mean(np.abs(out.samples - w.samples) ** 2))
        assert err <= 1e-12

    def test_integer_delay_is_circular_shift(self, rng):
        w = white_waveform(rng, n=2048)
        k = 37
        out = delay(w, k / w.sample_rate_hz)
        err = np.max(np.abs(out.samples - np.roll(w.samples, k)))
        assert err <= 1e-9

    def test_half_sample_delays_compose(self, rng):
        w = white_waveform(rng, n=2048)
        ts = 1 / w.sample_rate_hz
        twice = delay(delay(w, 0.5 * ts), 0.5 * ts)
        once = delay(w, ts)
        err = np.sqrt(np.mean(np.abs(twice.samples - once.samples) ** 2))
        assert err <= 1e-9

    def test_energy_preserved(self, rng):
        w = white_waveform(rng, n=2048)
        out = delay(w, 13.7 / w.sample_rate_hz)
        assert out.energy == pytest.approx(w.energy, rel=1e-12)

    def test_delay_exceeding_duration_rejected(self, rng):
        w = white_waveform(rng, n=256)
        with pytest.raises(ParameterError):
            delay(w, 2 * w.duration_s)


class TestFrequencyShift:
    def test_strict_rejects_noncommensurate(self, rng):
        w = white_waveform(rng, n=1000, fs=1e9)
        with pytest.raises(ParameterError):
            frequency_shift(w, 1.2345e5)

    def test_shift_moves_tone(self):
        w = tone(4096, 80e9, 0.0)
        out = frequency_shift(w, 20e9)
        freqs = np.fft.fftfreq(4096, 1 / 80e9)
        assert freqs[np.argmax(np.abs(np.fft.fft(out.samples)))] == pytest.approx(20e9)


class TestEstimatePsd:
    def test_white_noise_integrates_to_power(self, rng):
        w = white_waveform(rng, n=2**17, power=1.0)
        f, p = estimate_psd(w, rbw_hz=50e6)
        total = np.sum(p) * (f[1] - f[0])
        assert total == pytest.approx(1.0, rel=0.01)

    def test_tone_power_recovered(self, rng):
        w = tone(2**16, 80e9, 5e9, amp=np.sqrt(2.0))
        f, p = estimate_psd(w, rbw_hz=100e6)
        df = f[1] - f[0]
        peak_region = np.abs(f - 5e9) <= 5 * 100e6
        assert np.sum(p[peak_region]) * df == pytest.approx(2.0, rel=0.01)

    def test_too_fine_rbw_rejected(self, rng):
        w = white_waveform(rng, n=1024)
        with pytest.raises(ParameterError):
            estimate_psd(w, rbw_hz=w.sample_rate_hz / 4096)


class TestRngStream:
    def test_streams_are_deterministic_and_distinct(self):
        a1 = rng_stream(7, "noise").standard_normal(8)
        a2 = rng_stream(7, "noise").standard_normal(8)
        b = rng_stream(7, "payload").standard_normal(8)
        assert np.array_equal(a1, a2)
        assert not np.array_equal(a1, b)
