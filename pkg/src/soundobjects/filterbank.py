"""Zero-phase, log-spaced complex filter bank.

Every filter is a real, even weighting of the positive half of the
spectrum, so its output is the analytic signal of one band with the input
phase left untouched.  The bank runs over the whole recording with a single
forward FFT and one inverse FFT per filter; filters are processed in chunks
to bound the temporary memory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
import scipy.fft as sfft
from scipy.special import erf

from .audio_io import Recording
from .errors import AmplitudeTooLow, IndexOutOfRange, InvalidRange, SampleRateMismatch

FILTERS_PER_OCTAVE = 48
F_LO = 64.0
F_HI = 10000.0
BANDWIDTH_SPACINGS = 1.5
SETTLING_S = 0.05
CHUNK = 16
SUPPORT_SIGMAS = 5.0
MIN_AMPLITUDE = 1e-10
WEIGHT_SIGMAS = 7.0

# -3 dB half width of a Gaussian sits at sqrt(2 ln sqrt 2) standard deviations
_HALF_POWER_SIGMAS = math.sqrt(math.log(2.0))


@dataclass(frozen=True)
class FilterBank:
    sample_rate: int
    f_lo: float
    n_filters: int
    filters_per_octave: int = FILTERS_PER_OCTAVE
    bandwidth_spacings: float = BANDWIDTH_SPACINGS

    @cached_property
    def centers(self) -> np.ndarray:
        k = np.arange(self.n_filters)
        return self.f_lo * 2.0 ** (k / self.filters_per_octave)

    @property
    def spacing_octaves(self) -> float:
        return 1.0 / self.filters_per_octave

    @property
    def bandwidth_octaves(self) -> float:
        return self.bandwidth_spacings / self.filters_per_octave

    @property
    def sigma_octaves(self) -> float:
        """Standard deviation of each Gaussian in log2-frequency."""
        return 0.5 * self.bandwidth_octaves / _HALF_POWER_SIGMAS

    def gain(self, k: int | np.ndarray, freqs: np.ndarray) -> np.ndarray:
        """Magnitude response of filter(s) `k` at `freqs` (Hz, > 0)."""
        freqs = np.asarray(freqs, dtype=np.float64)
        with np.errstate(divide="ignore"):
            dist = np.log2(np.maximum(freqs, 1e-30)) - np.log2(self.centers[k])
        return np.exp(-0.5 * (dist / self.sigma_octaves) ** 2)

    def envelope_sigma(self, k: int | np.ndarray) -> np.ndarray:
        """Approximate std (samples) of filter `k`'s impulse-response envelope."""
        sigma_hz = self.centers[k] * math.log(2.0) * self.sigma_octaves
        return self.sample_rate / (2.0 * math.pi * sigma_hz)

    @property
    def support(self) -> int:
        """Half-length in samples of the longest impulse response kept."""
        return int(math.ceil(SUPPORT_SIGMAS * float(self.envelope_sigma(0))))

    def nearest(self, freq: float) -> int:
        k = round(self.filters_per_octave * math.log2(freq / self.f_lo))
        return int(min(max(k, 0), self.n_filters - 1))

    @property
    def bytes_per_second(self) -> float:
        """Size of the composite spectrum stored as complex64."""
        return self.n_filters * self.sample_rate * np.dtype(np.complex64).itemsize


def design_bank(
    sample_rate: int,
    f_lo: float = F_LO,
    f_hi: float = F_HI,
    filters_per_octave: int = FILTERS_PER_OCTAVE,
    bandwidth_spacings: float = BANDWIDTH_SPACINGS,
) -> FilterBank:
    if filters_per_octave < 1:
        raise InvalidRange("filters_per_octave must be >= 1")
    if not 0 < f_lo < f_hi < sample_rate / 2:
        raise InvalidRange(
            f"need 0 < f_lo < f_hi < Nyquist, got {f_lo}, {f_hi}, {sample_rate / 2}"
        )
    # tolerate rounding at exact octave multiples
    n = int(math.floor(filters_per_octave * math.log2(f_hi / f_lo) + 1e-9)) + 1
    return FilterBank(int(sample_rate), float(f_lo), n, filters_per_octave, bandwidth_spacings)


@dataclass(frozen=True)
class SpectrumFrame:
    time: float
    response: np.ndarray

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.response)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.response)


class Spectrum:
    """Composite spectrum: one complex value per filter and input sample.

    Stored as a ``(n_filters, n_samples)`` complex64 matrix.  Indexing yields
    `SpectrumFrame` objects, one per sample.
    """

    def __init__(self, bank: FilterBank, data: np.ndarray):
        self.bank = bank
        self.data = data

    @property
    def sample_rate(self) -> int:
        return self.bank.sample_rate

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n_samples

    def __getitem__(self, t: int) -> SpectrumFrame:
        if not -self.n_samples <= t < self.n_samples:
            raise IndexOutOfRange(f"frame {t} outside 0..{self.n_samples - 1}")
        t = t % self.n_samples
        return SpectrumFrame(t / self.sample_rate, self.data[:, t])

    def __iter__(self) -> Iterator[SpectrumFrame]:
        for t in range(self.n_samples):
            yield self[t]

    def amplitude(self, k: int) -> np.ndarray:
        return np.abs(self.data[k])

    @property
    def settling(self) -> int:
        return int(round(SETTLING_S * self.sample_rate))


def _edge_gain(bank: FilterBank, k: int, n: int) -> tuple[np.ndarray, int]:
    """Share of filter `k`'s envelope inside the recording, for the first
    `m` samples (the profile is mirrored at the end)."""
    sig = float(bank.envelope_sigma(k)) * math.sqrt(2.0)
    m = min(int(math.ceil(SUPPORT_SIGMAS * sig)), n // 2)
    t = np.arange(m) + 0.5
    return 0.5 * (erf(t / sig) - erf((t - n) / sig)), m


def analyze(
    bank: FilterBank,
    rec: Recording,
    chunk: int = CHUNK,
    edge_correction: bool = True,
    workers: int | None = None,
) -> Spectrum:
    """Run the bank over `rec`, returning per-sample complex band values.

    With `edge_correction` the band values near both ends are divided by the
    share of the filter's envelope that lies inside the recording.
    """
    if rec.sample_rate != bank.sample_rate:
        raise SampleRateMismatch(f"recording at {rec.sample_rate} Hz, bank at {bank.sample_rate} Hz")
    x = np.asarray(rec.samples, dtype=np.float64)
    n = len(x)
    out = np.empty((bank.n_filters, n), dtype=np.complex64)
    if n == 0:
        return Spectrum(bank, out)

    n_fft = sfft.next_fast_len(n + 2 * bank.support)
    # double precision until storage: weak off-center bands sit ~1e-6 below
    # the peak, where float32 round-off would swamp their phase
    spec = sfft.rfft(x, n_fft, workers=workers)
    df = bank.sample_rate / n_fft
    # bins outside +-WEIGHT_SIGMAS carry weights below 1e-10
    lo_f = bank.centers * 2.0 ** (-WEIGHT_SIGMAS * bank.sigma_octaves)
    hi_f = bank.centers * 2.0 ** (WEIGHT_SIGMAS * bank.sigma_octaves)
    lo_bin = np.maximum(np.floor(lo_f / df).astype(int), 1)
    hi_bin = np.minimum(np.ceil(hi_f / df).astype(int) + 1, len(spec))

    buf = np.empty((chunk, n_fft), dtype=np.complex128)
    for start in range(0, bank.n_filters, chunk):
        ks = range(start, min(start + chunk, bank.n_filters))
        buf.fill(0)
        for row, k in enumerate(ks):
            b0, b1 = lo_bin[k], hi_bin[k]
            w = 2.0 * bank.gain(k, np.arange(b0, b1) * df)
            buf[row, b0:b1] = w * spec[b0:b1]
        band = sfft.ifft(buf[: len(ks)], axis=1, overwrite_x=True, workers=workers)
        out[start : start + len(ks)] = band[:, :n]
    if edge_correction:
        for k in range(bank.n_filters):
            g, m = _edge_gain(bank, k, n)
            out[k, :m] /= g
            out[k, n - m :] /= g[::-1]
    return Spectrum(bank, out)


def instantaneous_frequency(spectrum: Spectrum, filter_index: int, t: int) -> float:
    """Frequency (Hz) from the wrapped phase step between samples t-1 and t."""
    if not 0 <= filter_index < spectrum.bank.n_filters:
        raise IndexOutOfRange(f"filter {filter_index} outside bank")
    if not 1 <= t < spectrum.n_samples:
        raise IndexOutOfRange(f"sample {t} outside 1..{spectrum.n_samples - 1}")
    z0 = complex(spectrum.data[filter_index, t - 1])
    z1 = complex(spectrum.data[filter_index, t])
    if min(abs(z0), abs(z1)) < MIN_AMPLITUDE:
        raise AmplitudeTooLow(f"filter {filter_index} silent at sample {t}")
    step = np.angle(z1 * z0.conjugate())
    return float(step * spectrum.sample_rate / (2.0 * math.pi))


def dump_band_csv(spectrum: Spectrum, filter_index: int, path) -> None:
    """Write one filter's (time, amplitude, instantaneous frequency) track."""
    z = spectrum.data[filter_index].astype(np.complex128)
    amp = np.abs(z)
    step = np.angle(z[1:] * np.conj(z[:-1]))
    freq = np.concatenate(([np.nan], step * spectrum.sample_rate / (2.0 * math.pi)))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "amplitude", "frequency"])
        for i in range(len(z)):
            writer.writerow([f"{i / spectrum.sample_rate:.6f}", f"{amp[i]:.8g}", f"{freq[i]:.6f}"])
