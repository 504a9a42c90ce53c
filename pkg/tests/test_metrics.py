import math

import numpy as np
import pytest
from scipy.special import erfc

from cycwdm.errors import ParameterError, ThresholdRangeError
from cycwdm.metrics import (
    HD_FEC,
    FecThreshold,
    QualityReport,
    ber_to_q2_db,
    nodes_reached,
    psd_ratio_db,
    q2_db_to_ber,
    required_osnr,
)


def q2_db_oracle(ber, lo=1e-6, hi=20.0):
    """Independent inverse: bisect BER(q) = 0.5 erfc(q/sqrt 2) for q."""
    f = lambda q: 0.5 * erfc(q / math.sqrt(2.0)) - ber
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 20.0 * math.log10(0.5 * (lo + hi))


class TestBerToQ2:
    def test_fec_threshold_anchor(self):
        # 7% HD-FEC threshold: BER 3.7e-3 corresponds to 8.56 dB
        assert ber_to_q2_db(3.7e-3) == pytest.approx(8.56, abs=0.02)
        assert ber_to_q2_db(3.7e-3) == pytest.approx(q2_db_oracle(3.7e-3), abs=1e-6)

    def test_value_at_1e3(self):
        assert ber_to_q2_db(1e-3) == pytest.approx(9.8, abs=0.05)
        assert ber_to_q2_db(1e-3) == pytest.approx(q2_db_oracle(1e-3), abs=1e-6)

    def test_domain_errors(self):
        for bad in (0.0, 0.5, -0.1, 0.7):
            with pytest.raises(ParameterError):
                ber_to_q2_db(bad)

    def test_strictly_decreasing(self):
        bers = np.logspace(-6, np.log10(0.49), 400)
        q2 = np.array([ber_to_q2_db(b) for b in bers])
        assert np.all(np.diff(q2) < 0)

    def test_round_trip(self):
        for ber in np.logspace(-6, np.log10(0.49), 50):
            back = q2_db_to_ber(ber_to_q2_db(ber))
            assert back == pytest.approx(ber, rel=1e-6)


class TestPsdRatio:
    def test_equal_bandwidths_is_identity(self):
        assert psd_ratio_db(17.3, 12.5e9, 12.5e9) == pytest.approx(17.3)

    def test_cyclic_vs_nyquist_offset(self):
        # at equal OSNR a 50-GHz spectrum has a lower density ratio than 40 GHz
        d = psd_ratio_db(20.0, 50e9) - psd_ratio_db(20.0, 40e9)
        assert d == pytest.approx(-10 * math.log10(50 / 40), abs=1e-12)

    def test_arithmetic_example(self):
        assert psd_ratio_db(20.0, 40e9, 12.5e9) == pytest.approx(14.95, abs=0.005)

    def test_rejects_bad_bandwidths(self):
        with pytest.raises(ParameterError):
            psd_ratio_db(20.0, -1.0)


class TestRequiredOsnr:
    def test_linear_interpolation(self):
        req = required_osnr([(14.0, 8.0), (16.0, 9.0)])
        assert req == pytest.approx(14.0 + 2.0 * 0.56 / 1.0, abs=1e-9)  # 15.12

    def test_exact_hit(self):
        assert required_osnr([(13.0, 7.0), (15.0, 8.56), (17.0, 10.0)]) == 15.0

    def test_out_of_range(self):
        with pytest.raises(ThresholdRangeError):
            required_osnr([(14.0, 9.0), (16.0, 10.0)])

    def test_custom_threshold(self):
        thr = FecThreshold(q2_db=9.0, name="custom")
        assert required_osnr([(14.0, 8.0), (16.0, 9.0)], thr) == pytest.approx(16.0)


class TestNodesReached:
    def test_examples(self):
        assert nodes_reached([10.0, 9.1, 8.6, 8.1]) == 3
        assert nodes_reached([10.0, 9.5, 9.2, 9.0, 8.8]) == 5
        assert nodes_reached([8.0, 9.0, 9.0]) == 0

    def test_monotone_under_pointwise_decrease(self):
        base = [10.0, 9.4, 8.9, 8.6, 8.3]
        worse = [q - 0.2 for q in base]
        assert nodes_reached(worse) <= nodes_reached(base)

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            nodes_reached([])


class TestQualityReport:
    def test_q2_computed_and_consistent(self):
        r = QualityReport(40e9, "nyquist", 15.0, 9.9, 0.0, 0, ber=3.7e-3)
        assert r.q2_db == pytest.approx(8.56, abs=0.02)

    def test_inconsistent_q2_rejected(self):
        with pytest.raises(ParameterError):
            QualityReport(40e9, "nyquist", 15.0, 9.9, 0.0, 0, ber=3.7e-3, q2_db=10.0)

    def test_zero_ber_maps_to_inf(self):
        r = QualityReport(40e9, "cyclic", 30.0, 24.9, 0.0, 0, ber=0.0)
        assert math.isinf(r.q2_db)


def test_hd_fec_constant():
    assert HD_FEC.q2_db == 8.56
    assert HD_FEC.name == "7% HD-FEC"
