"""Loading, validating and writing sustained-vowel recordings."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import TooShort, UnreadableFile, UnsupportedEncoding

CANONICAL_RATES = (22050, 44100)
DEFAULT_RATE = 22050
PEAK_LEVEL = 0.9
MIN_DURATION = 1.0

CLIPPING_RUN = 3
SILENCE_RMS = 1e-4
SHORT_DURATION = 6.0


@dataclass(frozen=True)
class Recording:
    """Mono PCM samples in [-1, 1] plus where they came from."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, gain: float) -> "Recording":
        return Recording(self.samples * gain, self.sample_rate, self.source_id)


@dataclass(frozen=True)
class QualityWarning:
    code: str
    message: str


@dataclass
class ValidationReport:
    warnings: list[QualityWarning] = field(default_factory=list)

    @property
    def codes(self) -> list[str]:
        return [w.code for w in self.warnings]

    def __bool__(self) -> bool:
        return bool(self.warnings)


def _to_float(data: np.ndarray) -> np.ndarray:
    kind = data.dtype
    if kind == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if kind == np.int16:
        return data.astype(np.float64) / 32768.0
    if kind == np.int32:
        # scipy left-justifies 24-bit PCM into int32
        return data.astype(np.float64) / 2147483648.0
    if kind in (np.float32, np.float64):
        return data.astype(np.float64)
    raise UnsupportedEncoding(f"unsupported sample type {kind}")


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Linear-phase polyphase resampling between integer rates."""
    ratio = Fraction(rate_out, rate_in).limit_denominator(10000)
    return resample_poly(samples, ratio.numerator, ratio.denominator)


def load_wav(path: str | os.PathLike, normalize: bool = True) -> Recording:
    """Read a PCM WAV file into a mono, peak-normalized `Recording`.

    Stereo input is averaged to mono.  Rates other than 22 050 or 44 100 Hz
    are resampled to 22 050 Hz.
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"{path}: no such file")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() or "bit" in msg.lower():
            raise UnsupportedEncoding(f"{path}: {msg}") from exc
        raise UnreadableFile(f"{path}: {msg}") from exc
    except (OSError, EOFError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc

    samples = _to_float(np.asarray(data))
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise UnsupportedEncoding(f"{path}: {samples.shape[1]} channels")
        samples = samples.mean(axis=1)
    if rate not in CANONICAL_RATES:
        samples = resample(samples, rate, DEFAULT_RATE)
        rate = DEFAULT_RATE

    if len(samples) / rate < MIN_DURATION:
        raise TooShort(f"{path}: {len(samples) / rate:.3f} s < {MIN_DURATION} s")

    if normalize:
        peak = np.max(np.abs(samples))
        if peak > 0:
            samples = samples * (PEAK_LEVEL / peak)
    else:
        samples = np.clip(samples, -1.0, 1.0)
    return Recording(samples, int(rate), path.stem)


def write_wav(path: str | os.PathLike, rec: Recording) -> None:
    """Write `rec` as 16-bit PCM, clamping to [-1, 1]."""
    pcm = np.round(np.clip(rec.samples, -1.0, 1.0) * 32767.0).astype(np.int16)
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    wavfile.write(tmp, rec.sample_rate, pcm)
    os.replace(tmp, path)


def _longest_run(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return int(np.max(edges[1::2] - edges[0::2]))


def validate_recording(rec: Recording) -> ValidationReport:
    """Advisory quality gate; never modifies `rec`."""
    report = ValidationReport()
    x = np.asarray(rec.samples)
    if _longest_run(np.abs(x) >= 1.0 - 1e-9) >= CLIPPING_RUN:
        report.warnings.append(QualityWarning("Clipping", "samples saturate at full scale"))
    rms = math.sqrt(float(np.mean(x * x))) if len(x) else 0.0
    if rms < SILENCE_RMS:
        report.warnings.append(QualityWarning("Silence", f"RMS {rms:.2e} below {SILENCE_RMS}"))
    if rec.duration < SHORT_DURATION:
        report.warnings.append(
            QualityWarning("Short", f"duration {rec.duration:.2f} s below {SHORT_DURATION} s")
        )
    return report
