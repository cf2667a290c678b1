"""Harmonic shifts: phase of each strong harmonic at the fundamental's zero phase."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import InsufficientShiftSamples, NoFundamental
from ..tracker import SoundObject
from .grouping import HarmonicGrouping

SECTION_S = 0.2
MAX_PER_SECTION = 8
GRID_PER_PERIOD = 32


def wrap(x):
    return np.angle(np.exp(1j * np.asarray(x)))


def _upcrossings(obj: SoundObject, t0: float, t1: float, f1: float) -> np.ndarray:
    """Times where the object's phase passes a multiple of 2*pi, upward."""
    a, b = max(obj.start, t0), min(obj.end, t1)
    if b <= a:
        return np.empty(0)
    n = max(int(math.ceil((b - a) * f1 * GRID_PER_PERIOD)), 2)
    t = np.linspace(a, b, n + 1)
    phase = obj.phase_at(t)
    m = np.arange(math.ceil(phase[0] / (2 * math.pi)), math.floor(phase[-1] / (2 * math.pi)) + 1)
    # frequency is positive, so the phase curve is monotone and invertible
    return np.interp(2 * math.pi * m, phase, t)


def _resultant(objs: Sequence[SoundObject], t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    acc = np.zeros(len(t), dtype=np.complex128)
    for o in objs:
        inside = (t >= o.start) & (t <= o.end)
        if inside.any():
            tt = t[inside]
            acc[inside] += o.amplitude_at(tt) * np.exp(1j * o.phase_at(tt))
    return np.angle(acc), np.abs(acc)


def fundamental_zero_times(grouping: HarmonicGrouping, window: tuple[float, float]) -> np.ndarray:
    """Zero-phase instants of F1, thinned to at most 8 per 200 ms section."""
    f1_objs = grouping.harmonics.get(1, [])
    if not f1_objs:
        raise NoFundamental("fundamental group is empty")
    t0, t1 = window
    candidates = []
    for o in f1_objs:
        ts = _upcrossings(o, t0, t1, grouping.f1)
        if len(ts) == 0:
            continue
        # where F1 objects overlap, only the locally strongest one counts
        mine = o.amplitude_at(ts)
        keep = np.ones(len(ts), dtype=bool)
        for other in f1_objs:
            if other is o:
                continue
            inside = (ts >= other.start) & (ts <= other.end)
            keep &= ~(inside & (other.amplitude_at(ts) > mine))
        candidates.append(ts[keep])
    if not candidates:
        return np.empty(0)
    times = np.sort(np.concatenate(candidates))

    out = []
    edges = np.arange(t0, t1 + SECTION_S, SECTION_S)
    for a, b in zip(edges[:-1], edges[1:]):
        sec = times[(times >= a) & (times < b)]
        if len(sec) > MAX_PER_SECTION:
            idx = np.round(np.linspace(0, len(sec) - 1, MAX_PER_SECTION)).astype(int)
            sec = sec[idx]
        out.append(sec)
    return np.concatenate(out) if out else np.empty(0)


@dataclass(frozen=True)
class ShiftSeries:
    harmonic: int
    times: np.ndarray
    shifts: np.ndarray


def harmonic_shift_series(
    grouping: HarmonicGrouping,
    h: int,
    window: tuple[float, float] | None = None,
    zero_times: np.ndarray | None = None,
) -> ShiftSeries:
    """Resultant phase of harmonic `h` at the fundamental's zero-phase instants."""
    if not grouping.harmonics.get(1):
        raise NoFundamental("fundamental group is empty")
    members = grouping.harmonics.get(h, [])
    if window is None:
        everything = [o for objs in grouping.harmonics.values() for o in objs]
        window = (min(o.start for o in everything), max(o.end for o in everything))
    if zero_times is None:
        zero_times = fundamental_zero_times(grouping, window)
    else:
        zero_times = zero_times[(zero_times >= window[0]) & (zero_times <= window[1])]
    phase, mag = _resultant(members, zero_times)
    present = mag > 0
    return ShiftSeries(h, zero_times[present], wrap(phase[present]))


@dataclass
class PhaseStats:
    mean_shift: dict[int, float] = field(default_factory=dict)
    shift_std: float = 0.0
    drift: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mean_shift": {str(h): v for h, v in self.mean_shift.items()},
            "shift_std": self.shift_std,
            "drift": self.drift,
        }


def circular_mean(x: np.ndarray) -> float:
    return float(np.angle(np.mean(np.exp(1j * x))))


def circular_std(x: np.ndarray) -> float:
    r = float(np.abs(np.mean(np.exp(1j * x))))
    return math.sqrt(-2.0 * math.log(min(max(r, 1e-300), 1.0)))


def phase_stats(series: Mapping[int, np.ndarray] | Sequence[ShiftSeries]) -> PhaseStats:
    """Circular mean per harmonic, pooled circular std and mean total variation.

    `series` maps harmonic number to its shift samples; the fundamental is
    ignored because its own shift is zero by construction.
    """
    if not isinstance(series, Mapping):
        series = {s.harmonic: s.shifts for s in series}
    usable = {h: np.asarray(s, dtype=np.float64) for h, s in series.items() if h != 1 and len(s) >= 2}
    if not usable:
        raise InsufficientShiftSamples("need a strong harmonic besides F1 with >= 2 shift samples")
    means = {h: circular_mean(s) for h, s in usable.items()}
    centered = np.concatenate([wrap(s - means[h]) for h, s in usable.items()])
    drift = float(np.mean([np.sum(np.abs(wrap(np.diff(s)))) / (len(s) - 1) for s in usable.values()]))
    return PhaseStats(mean_shift=means, shift_std=circular_std(centered), drift=drift)
