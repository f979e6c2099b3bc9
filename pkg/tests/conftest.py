import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikecodec import AudioSignal, TFKind, TFRepresentation


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {outcome} ({report.duration:.2f}s)", flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_tf(values, frame_rate_hz=1000.0, kind=TFKind.SPECTROGRAM):
    """Wrap a channels x frames matrix with synthetic ascending centers."""
    values = np.asarray(values, dtype=np.float64)
    centers = 100.0 + 200.0 * np.arange(values.shape[0])
    return TFRepresentation(values, frame_rate_hz, centers, kind)


def tone(freq_hz, duration_s=1.0, sample_rate_hz=20000.0, amplitude=0.8):
    n = np.arange(int(round(duration_s * sample_rate_hz)))
    return AudioSignal(amplitude * np.sin(2 * np.pi * freq_hz * n / sample_rate_hz),
                       sample_rate_hz)


def silence(duration_s=1.0, sample_rate_hz=20000.0):
    return AudioSignal(np.zeros(int(round(duration_s * sample_rate_hz))), sample_rate_hz)
