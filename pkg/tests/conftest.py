import functools

import numpy as np
import pytest

from soundobjects.audio_io import Recording
from soundobjects.pipeline import analyze_recording
from soundobjects.synth import SynthSpec, generate


@functools.lru_cache(maxsize=None)
def _cached(items):
    spec = SynthSpec(**dict(items))
    rec, truth = generate(spec)
    return rec, truth, analyze_recording(rec)


def synth_analysis(**kw):
    """(recording, ground truth, analysis) for a SynthSpec; memoized across tests."""
    return _cached(tuple(sorted(kw.items())))


def tone(freq, duration=2.0, sr=22050, amp=0.5, phase=0.0):
    t = np.arange(int(round(duration * sr))) / sr
    return Recording(amp * np.sin(2 * np.pi * freq * t + phase), sr, f"tone{freq}")


@pytest.fixture(scope="session")
def stationary():
    return synth_analysis(f0=150.0, n_harmonics=8, duration=3.0)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
