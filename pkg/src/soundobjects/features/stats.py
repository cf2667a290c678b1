"""Per-object amplitude and frequency statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TooFewPoints
from ..tracker import SoundObject

MIN_POINTS = 3


@dataclass(frozen=True)
class ObjectStats:
    mean_amp: float
    std_amp_pct: float
    shimmer_pct: float
    amp_slope_pct_per_s: float
    mean_freq: float
    std_freq_pct: float
    jitter_pct: float
    freq_slope_pct_per_s: float
    energy: float
    duration: float
    point_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def _slope(t: np.ndarray, y: np.ndarray) -> float:
    tc = t - t.mean()
    den = float(np.dot(tc, tc))
    if den == 0.0:
        return 0.0
    return float(np.dot(tc, y - y.mean())) / den


def track_stats(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Mean, std %, per-step total variation % and OLS slope %/s of one track."""
    mean = float(np.mean(y))
    std_pct = 100.0 * float(np.std(y)) / mean
    tv_pct = 100.0 * float(np.sum(np.abs(np.diff(y)))) / ((len(y) - 1) * mean)
    slope_pct = 100.0 * _slope(t, y) / mean
    return mean, std_pct, tv_pct, slope_pct


def object_stats(obj: SoundObject) -> ObjectStats:
    if obj.point_count < MIN_POINTS:
        raise TooFewPoints(f"object has {obj.point_count} points, need {MIN_POINTS}")
    t = obj.times
    a_mean, a_std, shimmer, a_slope = track_stats(t, obj.amplitudes)
    f_mean, f_std, jitter, f_slope = track_stats(t, obj.frequencies)
    return ObjectStats(
        mean_amp=a_mean,
        std_amp_pct=a_std,
        shimmer_pct=shimmer,
        # trend magnitude: rising and falling drifts count alike
        amp_slope_pct_per_s=abs(a_slope),
        mean_freq=f_mean,
        std_freq_pct=f_std,
        jitter_pct=jitter,
        freq_slope_pct_per_s=abs(f_slope),
        energy=obj.energy,
        duration=obj.duration,
        point_count=obj.point_count,
    )
