import math

import numpy as np
import pytest

from soundobjects.audio_io import Recording
from soundobjects.errors import AmplitudeTooLow, IndexOutOfRange, InvalidRange, SampleRateMismatch
from soundobjects.filterbank import analyze, design_bank, dump_band_csv, instantaneous_frequency

from .conftest import tone


@pytest.fixture(scope="module")
def bank():
    return design_bank(22050)


class TestDesign:
    def test_default_count_and_ratio(self, bank):
        assert bank.n_filters == 350
        c = bank.centers
        assert c[0] == 64.0
        assert np.allclose(c[1:] / c[:-1], 2 ** (1 / 48), rtol=1e-13)
        assert c[-1] == pytest.approx(64 * 2 ** (349 / 48))
        assert 9800 < c[-1] <= 10000

    def test_one_octave(self):
        b = design_bank(22050, 64, 128, 48)
        assert b.n_filters == 49
        assert b.centers[-1] == pytest.approx(128.0)

    def test_count_formula(self):
        for f_hi in (100.0, 1000.0, 5000.0):
            b = design_bank(22050, 64, f_hi, 48)
            assert b.n_filters == math.floor(48 * math.log2(f_hi / 64)) + 1

    @pytest.mark.parametrize("args", [(22050, 64, 11025), (22050, 0, 1000), (22050, 500, 400), (22050, 64, 1000, 0)])
    def test_invalid(self, args):
        with pytest.raises(InvalidRange):
            design_bank(*args)

    def test_minus_3db_width(self, bank):
        # half-power points sit 0.75 spacings either side of the center
        k = 100
        edge = bank.centers[k] * 2 ** (0.75 / 48)
        assert float(bank.gain(k, np.array([edge]))[0]) == pytest.approx(10 ** (-3.0103 / 20), rel=1e-4)
        assert float(bank.gain(k, np.array([bank.centers[k]]))[0]) == 1.0

    def test_data_rate(self, bank):
        assert bank.bytes_per_second / 1e6 == pytest.approx(61.74, abs=0.01)


class TestAnalyze:
    def test_one_frame_per_sample(self, bank):
        rec = tone(440.0, 1.0)
        spec = analyze(bank, rec)
        assert len(spec) == len(rec.samples)
        assert spec.data.shape == (350, len(rec.samples))
        frame = spec[100]
        assert frame.time == pytest.approx(100 / 22050)
        assert np.all(frame.amplitude >= 0)
        assert np.all(np.abs(frame.phase) <= np.pi)
        with pytest.raises(IndexOutOfRange):
            spec[len(rec.samples)]

    def test_tone_peaks_in_nearest_band(self, bank):
        spec = analyze(bank, tone(440.0, 1.0))
        mean_amp = np.abs(spec.data).mean(axis=1)
        assert int(np.argmax(mean_amp)) == bank.nearest(440.0)

    def test_zero_signal(self, bank):
        spec = analyze(bank, Recording(np.zeros(22050), 22050))
        assert not np.any(spec.data)

    def test_rate_mismatch(self, bank):
        with pytest.raises(SampleRateMismatch):
            analyze(bank, Recording(np.zeros(44100), 44100))

    def test_zero_phase_symmetry(self, bank):
        rng = np.random.default_rng(1)
        half = rng.normal(size=11025)
        x = np.concatenate([half, half[::-1]])
        spec = analyze(bank, Recording(x, 22050))
        for k in (20, 150, 300):
            a = np.abs(spec.data[k]).astype(np.float64)
            assert np.max(np.abs(a - a[::-1])) <= 1e-5 * np.max(a)

    def test_noise_energy_factor_is_stable(self, bank):
        # the band-energy / signal-energy ratio of white noise is set by the
        # bank's summed squared response; check it against that prediction
        ratios = []
        for seed in (1, 2, 3):
            x = np.random.default_rng(seed).normal(size=22050 * 2)
            spec = analyze(bank, Recording(x, 22050), edge_correction=False)
            ratios.append(float(np.sum(np.abs(spec.data.astype(np.complex128)) ** 2) / np.sum(x * x)))
        freqs = np.fft.rfftfreq(4096, 1 / 22050)[1:]
        g2 = sum(bank.gain(k, freqs) ** 2 for k in range(bank.n_filters))
        predicted = 2.0 * float(np.mean(g2))  # analytic signal doubles the positive half
        for r in ratios:
            assert r == pytest.approx(predicted, rel=0.05)
        assert np.std(ratios) / np.mean(ratios) < 0.02


class TestInstantaneousFrequency:
    def test_tone_440(self, bank):
        spec = analyze(bank, tone(440.0, 1.0))
        k0 = bank.nearest(440.0)
        for k in range(k0 - 4, k0 + 5):
            assert instantaneous_frequency(spec, k, 11025) == pytest.approx(440.0, abs=0.5)

    @pytest.mark.parametrize("freq", [100.0, 1000.0, 4000.0])
    def test_on_center_within_0_1_percent(self, bank, freq):
        k = bank.nearest(freq)
        f = float(bank.centers[k])
        spec = analyze(bank, tone(f, 1.0))
        for t in range(int(0.05 * 22050), 22050 - int(0.05 * 22050), 997):
            assert instantaneous_frequency(spec, k, t) == pytest.approx(f, rel=1e-3)

    def test_chirp_midpoint(self, bank):
        sr = 22050
        t = np.arange(sr) / sr
        x = 0.5 * np.sin(2 * np.pi * (400 * t + 50 * t**2))
        spec = analyze(bank, Recording(x, sr))
        k = bank.nearest(450.0)
        assert instantaneous_frequency(spec, k, sr // 2) == pytest.approx(450.0, abs=2.0)

    def test_errors(self, bank):
        spec = analyze(bank, Recording(np.zeros(22050), 22050))
        with pytest.raises(AmplitudeTooLow):
            instantaneous_frequency(spec, 10, 100)
        with pytest.raises(IndexOutOfRange):
            instantaneous_frequency(spec, 10, 0)
        with pytest.raises(IndexOutOfRange):
            instantaneous_frequency(spec, 350, 10)

    def test_band_csv(self, bank, tmp_path):
        spec = analyze(bank, tone(440.0, 1.0))
        k = bank.nearest(440.0)
        dump_band_csv(spec, k, tmp_path / "b.csv")
        rows = (tmp_path / "b.csv").read_text().splitlines()
        assert rows[0] == "time,amplitude,frequency"
        assert len(rows) == 22050 + 1
        t, a, f = rows[11026].split(",")
        assert float(f) == pytest.approx(440.0, abs=0.5)
