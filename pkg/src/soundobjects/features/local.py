"""Per-window (200 ms) statistics kept for interpretation, not classification."""

from __future__ import annotations

import numpy as np

from .grouping import HarmonicGrouping
from .phase import SECTION_S, circular_mean
from .stats import track_stats


def local_windows(
    grouping: HarmonicGrouping,
    duration: float,
    shifts: dict[int, tuple[np.ndarray, np.ndarray]] | None = None,
    width: float = SECTION_S,
) -> list[dict]:
    """Energy-weighted amplitude/frequency stats of strong-harmonic points per window."""
    members = grouping.members(grouping.strong_harmonics)
    out = []
    for start in np.arange(0.0, duration, width):
        stop = min(start + width, duration)
        rows, weights, count = [], [], 0
        for obj in members:
            sel = (obj.times >= start) & (obj.times < stop)
            if sel.sum() < 3:
                continue
            count += 1
            t = obj.times[sel]
            a = obj.amplitudes[sel]
            f = obj.frequencies[sel]
            _, a_std, shimmer, a_slope = track_stats(t, a)
            _, f_std, jitter, f_slope = track_stats(t, f)
            rows.append((a_std, shimmer, abs(a_slope), f_std, jitter, abs(f_slope)))
            weights.append(float(np.sum(a * a)))
        entry = {"start": float(start), "end": float(stop), "objects": count}
        if rows:
            avg = np.average(np.array(rows), axis=0, weights=np.array(weights))
            keys = ("amp_std", "shimmer", "amp_slope", "freq_std", "jitter", "freq_slope")
            entry.update({k: float(v) for k, v in zip(keys, avg)})
        if shifts:
            entry["mean_shift"] = {
                str(h): circular_mean(s[(t >= start) & (t < stop)])
                for h, (t, s) in shifts.items()
                if np.any((t >= start) & (t < stop))
            }
        out.append(entry)
    return out
