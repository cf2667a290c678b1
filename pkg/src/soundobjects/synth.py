"""Parametric sustained-vowel generator used as ground truth for the extractor.

Perturbations are drawn once per fundamental cycle.  Cycle ``i`` starts at
``cycle_times[i]`` and runs at a constant fundamental ``cycle_f0[i]`` for one
period, so the fundamental phase advances by exactly 2*pi per cycle.
Amplitude factors and phase walks are interpolated linearly between cycle
starts to keep the waveform continuous.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .audio_io import PEAK_LEVEL, Recording
from .errors import SpecInvalid

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SynthSpec:
    f0: float = 150.0
    n_harmonics: int = 8
    harmonic_amps: tuple[float, ...] | None = None
    jitter_pct: float = 0.0
    shimmer_pct: float = 0.0
    f0_slope_pct_per_s: float = 0.0
    amp_slope_pct_per_s: float = 0.0
    phase_walk_sigma: float = 0.0
    phase_noise_sigma: float = 0.0
    phase_offsets: tuple[float, ...] | None = None
    break_times: tuple[float, ...] = ()
    noise_snr_db: float = math.inf
    duration: float = 3.0
    sample_rate: int = 22050
    seed: int = 0

    def amps(self) -> np.ndarray:
        if self.harmonic_amps is None:
            return np.ones(self.n_harmonics)
        return np.asarray(self.harmonic_amps, dtype=np.float64)

    def offsets(self) -> np.ndarray:
        if self.phase_offsets is None:
            return np.zeros(self.n_harmonics)
        return np.asarray(self.phase_offsets, dtype=np.float64)

    def validate(self) -> None:
        problems = []
        if not 55.0 <= self.f0 <= 400.0:
            problems.append(f"f0 {self.f0} outside [55, 400] Hz")
        if not 1 <= self.n_harmonics <= 23:
            problems.append(f"n_harmonics {self.n_harmonics} outside 1..23")
        top = self.n_harmonics * self.f0 * (1 + max(self.f0_slope_pct_per_s, 0) * self.duration / 100)
        if top >= self.sample_rate / 2:
            problems.append("highest harmonic reaches Nyquist")
        if self.jitter_pct < 0 or self.shimmer_pct < 0:
            problems.append("jitter and shimmer must be >= 0")
        if self.phase_walk_sigma < 0 or self.phase_noise_sigma < 0:
            problems.append("phase perturbations must be >= 0")
        if self.harmonic_amps is not None and len(self.harmonic_amps) != self.n_harmonics:
            problems.append("harmonic_amps length differs from n_harmonics")
        if self.phase_offsets is not None and len(self.phase_offsets) != self.n_harmonics:
            problems.append("phase_offsets length differs from n_harmonics")
        if self.duration <= 0:
            problems.append("duration must be positive")
        if problems:
            raise SpecInvalid("; ".join(problems))


@dataclass
class GroundTruth:
    """Every perturbation the generator realized."""

    cycle_times: np.ndarray
    cycle_f0: np.ndarray
    cycle_amp: np.ndarray
    phase_walk: np.ndarray  # (n_harmonics, n_cycles), row 0 is zero
    phase_noise: np.ndarray  # (n_harmonics, n_cycles), row 0 is zero
    gain: float
    noise_std: float
    harmonic_amps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def jitter_pct(self) -> float:
        """Cycle-to-cycle mean absolute relative change of F0, in %."""
        f = self.cycle_f0
        return 100.0 * float(np.mean(np.abs(np.diff(f))) / np.mean(f))

    @property
    def shimmer_pct(self) -> float:
        a = self.cycle_amp
        return 100.0 * float(np.mean(np.abs(np.diff(a))) / np.mean(a))

    def harmonic_phase(self, h: int, t: np.ndarray) -> np.ndarray:
        """Injected walk plus noise of harmonic `h` (1-based) at times `t`."""
        w = self.phase_walk[h - 1] + self.phase_noise[h - 1]
        return np.interp(t, self.cycle_times, w)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gain": self.gain,
            "noise_std": self.noise_std,
            "jitter_pct": self.jitter_pct,
            "shimmer_pct": self.shimmer_pct,
            "harmonic_amps": self.harmonic_amps.tolist(),
            "cycle_times": self.cycle_times.tolist(),
            "cycle_f0": self.cycle_f0.tolist(),
            "cycle_amp": self.cycle_amp.tolist(),
            "phase_walk": self.phase_walk.tolist(),
            "phase_noise": self.phase_noise.tolist(),
        }


def _cycles(spec: SynthSpec, rng: np.random.Generator):
    # uniform +-a has E|u_i - u_j| = 2a/3
    jit = 1.5 * spec.jitter_pct / 100.0
    shim = 1.5 * spec.shimmer_pct / 100.0
    est = int(spec.duration * spec.f0 * 1.5) + 4
    u = rng.uniform(-jit, jit, est) if jit > 0 else np.zeros(est)
    s = rng.uniform(-shim, shim, est) if shim > 0 else np.zeros(est)
    slope = spec.f0_slope_pct_per_s / 100.0
    times, freqs = [0.0], []
    tau = 0.0
    i = 0
    while True:
        f = spec.f0 * (1.0 + slope * tau) * (1.0 + u[i])
        freqs.append(f)
        tau += 1.0 / f
        times.append(tau)
        i += 1
        if tau > spec.duration:
            break
    times = np.array(times)
    freqs = np.array(freqs + [freqs[-1]])
    amp = (1.0 + spec.amp_slope_pct_per_s / 100.0 * times) * (1.0 + s[: len(times)])
    return times, freqs, amp


def generate(spec: SynthSpec) -> tuple[Recording, GroundTruth]:
    """Additively synthesize the vowel described by `spec`."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate
    n = int(round(spec.duration * sr))
    t = np.arange(n) / sr

    times, freqs, amp = _cycles(spec, rng)
    n_cyc = len(times)
    H = spec.n_harmonics
    walk = np.zeros((H, n_cyc))
    noise = np.zeros((H, n_cyc))
    if spec.phase_walk_sigma > 0 and H > 1:
        steps = rng.normal(0.0, spec.phase_walk_sigma, (H - 1, n_cyc))
        steps[:, 0] = 0.0
        walk[1:] = np.cumsum(steps, axis=1)
    if spec.phase_noise_sigma > 0 and H > 1:
        noise[1:] = rng.normal(0.0, spec.phase_noise_sigma, (H - 1, n_cyc))

    cyc = np.clip(np.searchsorted(times, t, side="right") - 1, 0, n_cyc - 1)
    theta = 2.0 * np.pi * (cyc + freqs[cyc] * (t - times[cyc]))
    envelope = np.interp(t, times, amp)
    jump = np.zeros(n)
    for b in spec.break_times:
        jump[t >= b] += np.pi

    amps = spec.amps()
    offsets = spec.offsets()
    x = np.zeros(n)
    for h in range(1, H + 1):
        ph = h * theta + offsets[h - 1] + jump
        if h > 1:
            ph = ph + np.interp(t, times, walk[h - 1] + noise[h - 1])
        x += amps[h - 1] * np.sin(ph)
    x *= envelope

    noise_std = 0.0
    if math.isfinite(spec.noise_snr_db):
        power = float(np.mean(x * x))
        noise_std = math.sqrt(power / 10.0 ** (spec.noise_snr_db / 10.0))
        x = x + rng.normal(0.0, noise_std, n)

    peak = float(np.max(np.abs(x))) if n else 0.0
    gain = PEAK_LEVEL / peak if peak > 0 else 1.0
    rec = Recording(x * gain, sr, f"synth-{spec.seed}")
    truth = GroundTruth(times, freqs, amp, walk, noise, gain, noise_std * gain, amps * gain)
    return rec, truth


def spec_to_dict(spec: SynthSpec) -> dict:
    d = asdict(spec)
    if not math.isfinite(spec.noise_snr_db):
        d["noise_snr_db"] = None
    return d


def spec_from_dict(d: dict) -> SynthSpec:
    d = dict(d)
    if d.get("noise_snr_db") is None:
        d["noise_snr_db"] = math.inf
    for key in ("harmonic_amps", "phase_offsets", "break_times"):
        if d.get(key) is not None:
            d[key] = tuple(d[key])
    if d.get("break_times") is None:
        d["break_times"] = ()
    return SynthSpec(**d)


def grid(base: SynthSpec, **axes: Sequence) -> list[SynthSpec]:
    """Cartesian sweep of `base` over the named fields."""
    specs = [base]
    for name, values in axes.items():
        specs = [_replace(s, name, v) for s in specs for v in values]
    return specs


def _replace(spec: SynthSpec, name: str, value) -> SynthSpec:
    d = asdict(spec)
    d[name] = value
    return spec_from_dict(d)


def write_truth(path, spec: SynthSpec, truth: GroundTruth) -> None:
    with open(path, "w") as fh:
        json.dump({"spec": spec_to_dict(spec), "truth": truth.to_dict()}, fh)
