"""The 14-feature voice biomarker vector."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from ..errors import NoStrongHarmonics
from ..tracker import SoundObject
from .grouping import SIGNIFICANT_ENERGY, HarmonicGrouping, total_energy
from .phase import PhaseStats
from .stats import MIN_POINTS, ObjectStats, object_stats

HNR_CAP = 1000.0
HNR_FLOOR = 1e-9

FEATURE_NAMES = (
    "amp_std",
    "shimmer",
    "amp_slope",
    "freq_std",
    "jitter",
    "freq_slope",
    "phase_std",
    "phase_drift",
    "obj_per_harm",
    "subharm_count",
    "e_low_harm",
    "e_subharm",
    "hnr",
    "fq_tilt",
)


@dataclass
class BiomarkerVector:
    amp_std: float
    shimmer: float
    amp_slope: float
    freq_std: float
    jitter: float
    freq_slope: float
    phase_std: float
    phase_drift: float
    obj_per_harm: float
    subharm_count: float
    e_low_harm: float
    e_subharm: float
    hnr: float
    fq_tilt: float
    gender: str | None = None
    age: float | None = None
    flags: list[str] = field(default_factory=list)

    def features(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in FEATURE_NAMES}

    def as_array(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([self.value(n) for n in names], dtype=np.float64)

    def value(self, name: str) -> float:
        if name == "gender":
            return {"female": 0.0, "male": 1.0}.get(self.gender or "", math.nan)
        if name == "age":
            return math.nan if self.age is None else float(self.age)
        return float(getattr(self, name))

    def to_dict(self) -> dict:
        return asdict(self)


def _weighted(stats: Sequence[ObjectStats], attr: str) -> float:
    w = np.array([s.energy for s in stats])
    v = np.array([getattr(s, attr) for s in stats])
    if w.sum() <= 0:
        return float(np.mean(v))
    return float(np.dot(w, v) / w.sum())


def harmonic_tilt(grouping: HarmonicGrouping) -> float:
    """Fall-off of strong-group energy with harmonic number.

    Negated OLS slope of log10(group energy) against harmonic number, so a
    spectrum dominated by F1 scores positive and a flat one scores zero.
    """
    hs = grouping.strong_harmonics
    if len(hs) < 2:
        return 0.0
    x = np.array(hs, dtype=np.float64)
    y = np.log10([grouping.group_energy(h) for h in hs])
    xc = x - x.mean()
    return float(-np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def biomarkers(
    objects: Sequence[SoundObject],
    grouping: HarmonicGrouping,
    phase: PhaseStats | None,
) -> BiomarkerVector:
    strong = grouping.strong_harmonics
    if not strong:
        raise NoStrongHarmonics("no harmonic group holds 5% of the energy")
    flags: list[str] = []
    e_total = grouping.e_total if grouping.e_total > 0 else total_energy(objects)

    members = [o for o in grouping.members(strong) if o.point_count >= MIN_POINTS]
    stats = [object_stats(o) for o in members]

    if phase is None:
        flags.append("phase_unavailable")
        phase_std = phase_drift = 0.0
    else:
        phase_std, phase_drift = phase.shift_std, phase.drift

    e_harm = total_energy(grouping.members(grouping.harmonics.keys()))
    e_sub = total_energy(grouping.subharmonics)
    e_noise = total_energy(grouping.noise)
    denom = e_noise + e_sub
    if denom < HNR_FLOOR * e_total:
        hnr = HNR_CAP
        flags.append("hnr_capped")
    else:
        hnr = e_harm / denom
        if hnr > HNR_CAP:
            hnr = HNR_CAP
            flags.append("hnr_capped")

    return BiomarkerVector(
        amp_std=_weighted(stats, "std_amp_pct"),
        shimmer=_weighted(stats, "shimmer_pct"),
        amp_slope=_weighted(stats, "amp_slope_pct_per_s"),
        freq_std=_weighted(stats, "std_freq_pct"),
        jitter=_weighted(stats, "jitter_pct"),
        freq_slope=_weighted(stats, "freq_slope_pct_per_s"),
        phase_std=phase_std,
        phase_drift=phase_drift,
        obj_per_harm=len(grouping.members(strong)) / len(strong),
        subharm_count=float(sum(1 for o in grouping.subharmonics if o.energy > SIGNIFICANT_ENERGY * e_total)),
        e_low_harm=100.0 * total_energy(grouping.members(strong)) / e_total,
        e_subharm=100.0 * e_sub / e_total,
        hnr=hnr,
        fq_tilt=harmonic_tilt(grouping),
        flags=flags,
    )


def feature_fields() -> list[str]:
    return [f.name for f in fields(BiomarkerVector) if f.name in FEATURE_NAMES]
