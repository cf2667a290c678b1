"""Sound-object extraction from the composite spectrum, and resynthesis.

A sound object is a ridge of the spectrum followed point by point at steps
of about two periods of its own frequency.  Each step must keep a local
amplitude maximum across the filter axis, change frequency slowly, and land
on a measured phase that agrees with the phase predicted by integrating the
object's frequency.  A phase mismatch closes the object; the ridge is then
free to start a new object with a fresh initial phase.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from numba import njit

from .audio_io import Recording
from .errors import LengthMismatch
from .filterbank import FilterBank, Spectrum

TWO_PI = 2.0 * math.pi

PHASE_TOLERANCE = math.pi / 4
FLOOR_DB = 60.0
MAX_FREQ_STEP = 0.06
PERIODS_PER_STEP = 2.0
MIN_POINTS = 3
SEED_HOP_S = 0.0015
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ObjectPoint:
    time: float
    amplitude: float
    frequency: float


@dataclass(frozen=True, eq=False)
class SoundObject:
    """One tracked partial, stored column-wise.

    ``initial_phase`` is the phase of ``amplitude * sin(phase)`` at the first
    point; later phases follow from integrating the frequency track.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    initial_phase: float

    def __post_init__(self):
        for name in ("times", "amplitudes", "frequencies"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def point_count(self) -> int:
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def energy(self) -> float:
        """Trapezoidal integral of amplitude squared over the object's span."""
        if len(self.times) < 2:
            return 0.0
        return float(np.trapezoid(self.amplitudes**2, self.times))

    @property
    def mean_frequency(self) -> float:
        return float(np.mean(self.frequencies))

    @property
    def points(self) -> list[ObjectPoint]:
        return [
            ObjectPoint(float(t), float(a), float(f))
            for t, a, f in zip(self.times, self.amplitudes, self.frequencies)
        ]

    def phase_at(self, t: np.ndarray) -> np.ndarray:
        """Unwrapped model phase at times inside the object's span."""
        return _phase_curve(self, np.asarray(t, dtype=np.float64))

    def amplitude_at(self, t: np.ndarray) -> np.ndarray:
        return np.interp(t, self.times, self.amplitudes)

    def to_dict(self) -> dict:
        return {
            "initial_phase": self.initial_phase,
            "points": [
                {"t": float(t), "a": float(a), "f": float(f)}
                for t, a, f in zip(self.times, self.amplitudes, self.frequencies)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SoundObject":
        pts = d["points"]
        return cls(
            np.array([p["t"] for p in pts], dtype=np.float64),
            np.array([p["a"] for p in pts], dtype=np.float64),
            np.array([p["f"] for p in pts], dtype=np.float64),
            float(d["initial_phase"]),
        )


def _phase_curve(obj: SoundObject, t: np.ndarray) -> np.ndarray:
    # frequency is linear between points, so the trapezoid rule is exact
    times, freqs = obj.times, obj.frequencies
    seg_phase = np.concatenate(
        ([0.0], np.cumsum(np.pi * (freqs[1:] + freqs[:-1]) * np.diff(times)))
    )
    idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
    dt = t - times[idx]
    span = times[idx + 1] - times[idx]
    slope = (freqs[idx + 1] - freqs[idx]) / span
    return obj.initial_phase + seg_phase[idx] + TWO_PI * (freqs[idx] * dt + 0.5 * slope * dt * dt)


# ---------------------------------------------------------------------------
# numba kernel


@njit(cache=True)
def _wrap(x):
    return x - TWO_PI * math.floor((x + math.pi) / TWO_PI)


@njit(cache=True)
def _amp(z):
    return math.sqrt(z.real * z.real + z.imag * z.imag)


@njit(cache=True)
def _is_peak(data, k, n):
    a = _amp(data[k, n])
    return _amp(data[k - 1, n]) < a and a >= _amp(data[k + 1, n])


@njit(cache=True)
def _measure(data, k, n, log2_lo, fpo, sr):
    """Interpolated log-frequency, amplitude, instantaneous frequency, phase."""
    ym = math.log(max(_amp(data[k - 1, n]), 1e-30))
    y0 = math.log(max(_amp(data[k, n]), 1e-30))
    yp = math.log(max(_amp(data[k + 1, n]), 1e-30))
    den = ym - 2.0 * y0 + yp
    p = 0.0
    if den < 0.0:
        p = 0.5 * (ym - yp) / den
        if p > 0.5:
            p = 0.5
        elif p < -0.5:
            p = -0.5
    log2_f = log2_lo + (k + p) / fpo
    amp = math.exp(y0 - 0.25 * (ym - yp) * p)
    z1 = data[k, n + 1]
    z0 = data[k, n - 1]
    cross = z1 * z0.conjugate()
    inst = math.atan2(cross.imag, cross.real) * 0.5 * sr / TWO_PI
    z = data[k, n]
    phase = math.atan2(z.imag, z.real)
    return log2_f, amp, inst, phase


@njit(cache=True)
def _ridge_ok(log2_f, inst, half_spacing):
    if inst <= 0.0:
        return False
    return abs(math.log2(inst) - log2_f) <= half_spacing


@njit(cache=True)
def _mark(covered, k0, k1, n0, n1):
    lo = min(k0, k1) - 1
    hi = max(k0, k1) + 1
    if lo < 0:
        lo = 0
    if hi > covered.shape[0] - 1:
        hi = covered.shape[0] - 1
    a = min(n0, n1)
    b = max(n0, n1)
    for k in range(lo, hi + 1):
        for n in range(a, b + 1):
            covered[k, n] = 1


@njit(cache=True)
def _follow(data, covered, k, n, f, phase, direction, floor, log2_lo, fpo, sr,
            tol, max_step, periods, out_n, out_k, out_a, out_f, out_p, out_d):
    """Extend an object from (k, n) in one direction; returns points written."""
    n_filters, n_samples = data.shape
    half_spacing = 0.5 / fpo
    reach = int(math.ceil(math.log2(1.0 + max_step) * fpo))
    count = 0
    while True:
        step = int(round(periods * sr / f))
        if step < 1:
            step = 1
        n2 = n + direction * step
        if n2 < 1 or n2 > n_samples - 2:
            break
        best = -1
        best_dist = 1e30
        for k2 in range(max(1, k - reach), min(n_filters - 2, k + reach) + 1):
            if _is_peak(data, k2, n2):
                lf, a2, i2, p2 = _measure(data, k2, n2, log2_lo, fpo, sr)
                d = abs(lf - math.log2(f))
                if d < best_dist:
                    best_dist = d
                    best = k2
        if best < 0:
            break
        if covered[best, n2]:
            break
        lf, a2, f2, p2 = _measure(data, best, n2, log2_lo, fpo, sr)
        if a2 <= floor or not _ridge_ok(lf, f2, half_spacing):
            break
        if abs(f2 - f) > max_step * f:
            break
        predicted = phase + direction * math.pi * (f + f2) * step / sr
        if abs(_wrap(p2 - predicted)) > tol:
            break
        _mark(covered, k, best, n, n2)
        out_n[count] = n2
        out_k[count] = best
        out_a[count] = a2
        out_f[count] = f2
        out_p[count] = predicted
        out_d[count] = _wrap(p2 - predicted)
        count += 1
        k = best
        n = n2
        f = f2
        phase = predicted
    return count


@njit(cache=True)
def _track(data, floor, log2_lo, fpo, sr, tol, max_step, periods, seed_hop,
           settle, min_points):
    n_filters, n_samples = data.shape
    covered = np.zeros((n_filters, n_samples), dtype=np.uint8)
    half_spacing = 0.5 / fpo
    cap = n_samples + 16
    fw_n = np.empty(cap, np.int64)
    fw_k = np.empty(cap, np.int64)
    fw_a = np.empty(cap)
    fw_f = np.empty(cap)
    fw_p = np.empty(cap)
    fw_d = np.empty(cap)
    bw_n = np.empty(cap, np.int64)
    bw_k = np.empty(cap, np.int64)
    bw_a = np.empty(cap)
    bw_f = np.empty(cap)
    bw_p = np.empty(cap)
    bw_d = np.empty(cap)

    size = 1024
    pts_n = np.empty(size, np.int64)
    pts_a = np.empty(size)
    pts_f = np.empty(size)
    starts = [0]
    phases = [0.0]
    total = 0

    lo = max(settle, 1)
    hi = min(n_samples - settle, n_samples - 2)
    for n in range(lo, hi, seed_hop):
        for k in range(1, n_filters - 1):
            if covered[k, n]:
                continue
            if not _is_peak(data, k, n):
                continue
            lf, a, f, p = _measure(data, k, n, log2_lo, fpo, sr)
            if a <= floor or not _ridge_ok(lf, f, half_spacing):
                continue
            covered[k, n] = 1
            nf = _follow(data, covered, k, n, f, p, 1, floor, log2_lo, fpo, sr,
                         tol, max_step, periods, fw_n, fw_k, fw_a, fw_f, fw_p, fw_d)
            nb = _follow(data, covered, k, n, f, p, -1, floor, log2_lo, fpo, sr,
                         tol, max_step, periods, bw_n, bw_k, bw_a, bw_f, bw_p, bw_d)
            m = nb + 1 + nf
            if m < min_points:
                continue
            while total + m > size:
                size *= 2
                new_n = np.empty(size, np.int64)
                new_a = np.empty(size)
                new_f = np.empty(size)
                new_n[:total] = pts_n[:total]
                new_a[:total] = pts_a[:total]
                new_f[:total] = pts_f[:total]
                pts_n = new_n
                pts_a = new_a
                pts_f = new_f
            # anchor the phase where the object is strong: power-weighted
            # circular mean of measured minus integrated phase
            c = a * a
            s = 0.0
            j = total
            for i in range(nb - 1, -1, -1):
                pts_n[j] = bw_n[i]
                pts_a[j] = bw_a[i]
                pts_f[j] = bw_f[i]
                w = bw_a[i] * bw_a[i]
                c += w * math.cos(bw_d[i])
                s += w * math.sin(bw_d[i])
                j += 1
            pts_n[j] = n
            pts_a[j] = a
            pts_f[j] = f
            j += 1
            for i in range(nf):
                pts_n[j] = fw_n[i]
                pts_a[j] = fw_a[i]
                pts_f[j] = fw_f[i]
                w = fw_a[i] * fw_a[i]
                c += w * math.cos(fw_d[i])
                s += w * math.sin(fw_d[i])
                j += 1
            first_phase = (bw_p[nb - 1] if nb > 0 else p) + math.atan2(s, c)
            total = j
            starts.append(total)
            phases.append(first_phase)
    return pts_n[:total], pts_a[:total], pts_f[:total], np.array(starts), np.array(phases[1:])


# ---------------------------------------------------------------------------


def track_objects(
    spectrum: Spectrum,
    bank: FilterBank | None = None,
    floor_db: float = FLOOR_DB,
    phase_tolerance: float = PHASE_TOLERANCE,
    min_points: int = MIN_POINTS,
) -> list[SoundObject]:
    """Extract sound objects from a composite spectrum.

    The amplitude floor is `floor_db` below the strongest band value, which
    for a sinusoid equals its peak sample amplitude.
    """
    bank = bank or spectrum.bank
    data = spectrum.data
    if data.size == 0:
        return []
    peak = float(np.max(np.abs(data)))
    if peak <= 0.0:
        return []
    floor = peak * 10.0 ** (-floor_db / 20.0)
    sr = float(bank.sample_rate)
    seed_hop = max(1, int(round(SEED_HOP_S * sr)))
    settle = spectrum.settling
    pts_n, pts_a, pts_f, starts, phases = _track(
        data, floor, math.log2(bank.f_lo), float(bank.filters_per_octave), sr,
        phase_tolerance, MAX_FREQ_STEP, PERIODS_PER_STEP, seed_hop, settle, min_points,
    )
    objects = []
    for i in range(len(phases)):
        s, e = starts[i], starts[i + 1]
        # model phase is that of the analytic signal (cosine); store it for sine
        init = float(_wrap_py(phases[i] + math.pi / 2))
        objects.append(SoundObject(pts_n[s:e] / sr, pts_a[s:e], pts_f[s:e], init))
    objects.sort(key=lambda o: (o.start, o.mean_frequency))
    return objects


def _wrap_py(x: float | np.ndarray):
    return x - TWO_PI * np.floor((x + np.pi) / TWO_PI)


def render(objects: Iterable[SoundObject], sample_rate: int, n_samples: int) -> np.ndarray:
    """Sum of the objects as sinusoids, unclamped."""
    out = np.zeros(n_samples, dtype=np.float64)
    for obj in objects:
        if obj.point_count < 2:
            continue
        i0 = max(int(math.ceil(obj.start * sample_rate - 1e-9)), 0)
        i1 = min(int(math.floor(obj.end * sample_rate + 1e-9)), n_samples - 1)
        if i1 < i0:
            continue
        t = np.arange(i0, i1 + 1) / sample_rate
        out[i0 : i1 + 1] += obj.amplitude_at(t) * np.sin(obj.phase_at(t))
    return out


def reconstruct(objects: Sequence[SoundObject], sample_rate: int, duration: float) -> Recording:
    n = int(round(duration * sample_rate))
    y = np.clip(render(objects, sample_rate, n), -1.0, 1.0)
    return Recording(y, int(sample_rate), "reconstruction")


def reproduction_score(original: Recording, reconstructed: Recording) -> float:
    """1 - residual energy / original energy, floored at 0."""
    if len(original.samples) != len(reconstructed.samples):
        raise LengthMismatch(f"{len(original.samples)} vs {len(reconstructed.samples)} samples")
    if original.sample_rate != reconstructed.sample_rate:
        raise LengthMismatch("sample rates differ")
    x = np.asarray(original.samples, dtype=np.float64)
    y = np.asarray(reconstructed.samples, dtype=np.float64)
    ref = float(np.sum(x * x))
    if ref == 0.0:
        return 1.0 if not np.any(y) else 0.0
    return max(0.0, 1.0 - float(np.sum((x - y) ** 2)) / ref)


def dump_objects(objects: Iterable[SoundObject]) -> dict:
    return {"schema_version": SCHEMA_VERSION, "objects": [o.to_dict() for o in objects]}


def load_objects(doc: dict | str) -> list[SoundObject]:
    if isinstance(doc, str):
        doc = json.loads(doc)
    return [SoundObject.from_dict(d) for d in doc["objects"]]
