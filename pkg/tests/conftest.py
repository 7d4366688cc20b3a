import numpy as np
import pytest

from ssvepkit.signals import SampledSignal

SEVEN_TARGETS = (6.0, 6.5, 7.0, 7.5, 8.2, 9.3, 10.0)
THREE_TARGETS = (8.0, 14.0, 28.0)


def make_tone(freq, duration=8.0, fs=256.0, amplitude=1.0, phase=0.0, channel="Oz"):
    t = np.arange(int(round(duration * fs))) / fs
    return SampledSignal((channel,), amplitude * np.sin(2 * np.pi * freq * t + phase), fs)


def dft_amplitude(x: np.ndarray, freq: float, fs: float) -> float:
    """Single-bin DFT projection: amplitude of the ``freq`` component.

    Independent of the fft-based spectrum path; used as the oracle for
    filtering and synthesis checks.
    """
    n = x.size
    t = np.arange(n) / fs
    z = np.exp(-2j * np.pi * freq * t)
    return 2.0 * abs(np.dot(x, z)) / n


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
