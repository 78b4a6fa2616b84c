import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eardynamic.dsp import ProbeConfig, synthesize_probe

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def probe():
    return synthesize_probe(ProbeConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone(freq, n, fs=48000, amp=0.5):
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / fs)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))
