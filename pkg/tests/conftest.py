import numpy as np
import pytest

from cycwdm.dspcore import ComplexWaveform
from cycwdm.txgen import generate_frame


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def white_waveform(rng, n=32768, fs=80e9, power=1.0):
    s = np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return ComplexWaveform(s, fs)


def tone(n, fs, f0, amp=1.0):
    t = np.arange(n) / fs
    return ComplexWaveform(amp * np.exp(2j * np.pi * f0 * t), fs)


# smallest frame-size multiple that keeps every resampling in the shaping
# chain (2 Sa/symbol -> 2x grid -> 256 GSa/s) and the +-25/+-75 GHz carrier
# shifts exact on a circular record
FRAME_MULTIPLE = {40e9: 40, 42.5e9: 85, 45e9: 45, 47.5e9: 95}


def frame_for(baud_hz, approx_payload, n_training=256, seed=5):
    m = FRAME_MULTIPLE[baud_hz]
    n_frame = max(2, (approx_payload + n_training + m - 1) // m) * m
    return generate_frame(seed, n_frame - n_training, n_training)
