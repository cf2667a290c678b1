import numpy as np
import pytest
from scipy.io import wavfile

from soundobjects.audio_io import (
    PEAK_LEVEL,
    Recording,
    load_wav,
    validate_recording,
    write_wav,
)
from soundobjects.errors import TooShort, UnreadableFile, UnsupportedEncoding


def _sine(sr, seconds=1.5, f=220.0):
    t = np.arange(int(sr * seconds)) / sr
    return np.sin(2 * np.pi * f * t)


class TestLoad:
    def test_int16_is_peak_normalized(self, tmp_path):
        x = (0.3 * _sine(22050) * 32767).astype(np.int16)
        wavfile.write(tmp_path / "a.wav", 22050, x)
        rec = load_wav(tmp_path / "a.wav")
        assert rec.sample_rate == 22050
        assert np.max(np.abs(rec.samples)) == pytest.approx(PEAK_LEVEL)
        assert rec.source_id == "a"

    def test_uint8_and_int32_and_float(self, tmp_path):
        x = _sine(22050)
        wavfile.write(tmp_path / "u8.wav", 22050, np.round(127.5 + 100 * x).astype(np.uint8))
        wavfile.write(tmp_path / "i32.wav", 22050, np.round(x * 2**30).astype(np.int32))
        wavfile.write(tmp_path / "f32.wav", 22050, (0.5 * x).astype(np.float32))
        for name in ("u8", "i32", "f32"):
            rec = load_wav(tmp_path / f"{name}.wav")
            corr = np.corrcoef(rec.samples, x)[0, 1]
            assert corr > 0.999, name

    def test_stereo_is_averaged(self, tmp_path):
        x = _sine(22050)
        st = np.stack([x, np.zeros_like(x)], axis=1).astype(np.float32)
        wavfile.write(tmp_path / "s.wav", 22050, st)
        rec = load_wav(tmp_path / "s.wav", normalize=False)
        assert rec.samples.ndim == 1
        assert np.max(np.abs(rec.samples)) == pytest.approx(0.5, abs=1e-4)

    def test_odd_rate_resampled(self, tmp_path):
        wavfile.write(tmp_path / "r.wav", 16000, _sine(16000).astype(np.float32))
        rec = load_wav(tmp_path / "r.wav")
        assert rec.sample_rate == 22050
        assert rec.duration == pytest.approx(1.5, abs=1e-3)

    def test_44100_kept(self, tmp_path):
        wavfile.write(tmp_path / "r.wav", 44100, _sine(44100).astype(np.float32))
        assert load_wav(tmp_path / "r.wav").sample_rate == 44100

    def test_too_short(self, tmp_path):
        wavfile.write(tmp_path / "s.wav", 22050, _sine(22050, 0.5).astype(np.float32))
        with pytest.raises(TooShort):
            load_wav(tmp_path / "s.wav")

    def test_garbage_and_missing(self, tmp_path):
        (tmp_path / "g.wav").write_bytes(b"not a wave file at all")
        with pytest.raises((UnreadableFile, UnsupportedEncoding)):
            load_wav(tmp_path / "g.wav")
        with pytest.raises(UnreadableFile):
            load_wav(tmp_path / "missing.wav")

    def test_roundtrip(self, tmp_path):
        rec = Recording(0.9 * _sine(22050), 22050, "x")
        write_wav(tmp_path / "o.wav", rec)
        back = load_wav(tmp_path / "o.wav")
        assert np.max(np.abs(back.samples - rec.samples)) < 1e-4
        assert not list(tmp_path.glob("*.part"))


class TestValidate:
    def test_clean(self):
        rec = Recording(0.5 * _sine(22050, 7.0), 22050)
        assert validate_recording(rec).codes == []

    def test_clipping_silence_short(self):
        x = np.zeros(22050 * 2)
        assert "Silence" in validate_recording(Recording(x, 22050)).codes
        x = np.clip(2 * _sine(22050, 2.0), -1, 1)
        codes = validate_recording(Recording(x, 22050)).codes
        assert "Clipping" in codes and "Short" in codes

    def test_scaled(self):
        rec = Recording(_sine(22050), 22050)
        assert np.allclose(rec.scaled(0.25).samples, 0.25 * rec.samples)
