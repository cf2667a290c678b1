"""Selection of significant objects, fundamental search and harmonic grouping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import NoHarmonicStructure
from ..tracker import SoundObject

SIGNIFICANT_ENERGY = 0.01
SIGNIFICANT_DURATION = 1.0
F1_MIN = 55.0
F1_MAX = 400.0
COARSE_STEP = 0.5
FINE_STEP = 0.01
HARMONIC_TOL = 0.03
MAX_HARMONIC = 23
STRONG_SHARE = 0.05
MIN_HARMONIC_SHARE = 0.5
ENERGY_TIE = 0.01
LOW_NOISE_HZ = 200.0
HIGH_NOISE_HZ = 2000.0


def total_energy(objects: Sequence[SoundObject]) -> float:
    return float(sum(o.energy for o in objects))


def select_significant(objects: Sequence[SoundObject]) -> list[SoundObject]:
    """Objects above 1% of the total energy, or longer than one second."""
    e_total = total_energy(objects)
    return [
        o
        for o in objects
        if o.energy > SIGNIFICANT_ENERGY * e_total or o.duration > SIGNIFICANT_DURATION
    ]


def _support(freqs: np.ndarray, d: np.ndarray):
    """Harmonic numbers and support mask of every frequency for divisors `d`."""
    n = np.rint(freqs[None, :] / d[:, None])
    ok = (n >= 1) & (n <= MAX_HARMONIC) & (np.abs(freqs[None, :] - n * d[:, None]) <= HARMONIC_TOL * freqs[None, :])
    return n, ok


def _score(freqs, energies, d):
    n, ok = _support(freqs, d)
    # a divisor with no object of its own at n = 1 is not a fundamental; with
    # a 3% window and 23 harmonics almost any partial set has such divisors
    rooted = (ok & (n == 1)).any(axis=1)
    ok &= rooted[:, None]
    energy = (ok * energies[None, :]).sum(axis=1)
    rel = (freqs[None, :] - n * d[:, None]) / freqs[None, :]
    sq = (ok * energies[None, :] * rel**2).sum(axis=1)
    misfit = np.divide(sq, energy, out=np.full_like(sq, np.inf), where=energy > 0)
    return energy, misfit


def _best(energy, misfit, e_scale):
    # energy within ENERGY_TIE of the best counts as equal; then the smallest
    # mean squared relative misfit; exact misfit ties go to the larger divisor
    top = energy >= energy.max() - ENERGY_TIE * e_scale
    m = np.where(top, misfit, np.inf)
    m_min = m.min()
    cand = np.flatnonzero(m <= m_min * (1 + 1e-6) + 1e-15)
    return int(cand[-1])


@dataclass(frozen=True)
class Fundamental:
    f1: float
    supporters: tuple[int, ...]
    energy: float
    share: float


def find_fundamental(selected: Sequence[SoundObject]) -> Fundamental:
    """Common divisor of the selected objects' mean frequencies.

    Divisors in [55, 400] Hz are scored by the energy of the objects whose
    mean frequency lies within 3% of an integer multiple, provided one of
    them sits at the divisor itself.  Among divisors
    whose energy is within 1% of the best, the one with the smallest
    energy-weighted relative misfit wins, and exact ties go to the larger
    divisor, so a subharmonic of the true fundamental never beats it.
    """
    if not selected:
        raise NoHarmonicStructure("no significant objects")
    freqs = np.array([o.mean_frequency for o in selected])
    energies = np.array([o.energy for o in selected])
    e_sel = float(energies.sum())
    if e_sel <= 0:
        raise NoHarmonicStructure("selected objects carry no energy")

    coarse = np.arange(F1_MIN, F1_MAX + COARSE_STEP / 2, COARSE_STEP)
    energy, misfit = _score(freqs, energies, coarse)
    i = _best(energy, misfit, e_sel)
    d0 = coarse[i]
    fine = np.arange(max(F1_MIN, d0 - COARSE_STEP), min(F1_MAX, d0 + COARSE_STEP) + FINE_STEP / 2, FINE_STEP)
    energy_f, misfit_f = _score(freqs, energies, fine)
    j = _best(energy_f, misfit_f, e_sel)
    f1, e_best = float(fine[j]), float(energy_f[j])
    if e_best < MIN_HARMONIC_SHARE * e_sel:
        raise NoHarmonicStructure(
            f"best divisor {f1:.2f} Hz gathers {100 * e_best / e_sel:.1f}% of selected energy"
        )
    _, ok = _support(freqs, np.array([f1]))
    return Fundamental(f1, tuple(int(k) for k in np.flatnonzero(ok[0])), e_best, e_best / e_sel)


@dataclass
class HarmonicGrouping:
    f1: float
    e_total: float
    harmonics: dict[int, list[SoundObject]] = field(default_factory=dict)
    subharmonics: list[SoundObject] = field(default_factory=list)
    noise_low: list[SoundObject] = field(default_factory=list)
    noise_mid: list[SoundObject] = field(default_factory=list)
    noise_high: list[SoundObject] = field(default_factory=list)

    def group_energy(self, h: int) -> float:
        return total_energy(self.harmonics.get(h, []))

    @property
    def strong_harmonics(self) -> list[int]:
        strong = [
            h
            for h, objs in self.harmonics.items()
            if objs and self.group_energy(h) >= STRONG_SHARE * self.e_total
        ]
        if self.harmonics.get(1):
            strong.append(1)
        return sorted(set(strong))

    @property
    def weak_harmonics(self) -> list[int]:
        strong = set(self.strong_harmonics)
        return sorted(h for h, objs in self.harmonics.items() if objs and h not in strong)

    @property
    def noise(self) -> list[SoundObject]:
        return self.noise_low + self.noise_mid + self.noise_high

    def members(self, hs) -> list[SoundObject]:
        return [o for h in hs for o in self.harmonics.get(h, [])]

    def energy_partition(self) -> dict[str, float]:
        return {
            "strong": total_energy(self.members(self.strong_harmonics)),
            "weak": total_energy(self.members(self.weak_harmonics)),
            "subharmonic": total_energy(self.subharmonics),
            "noise_low": total_energy(self.noise_low),
            "noise_mid": total_energy(self.noise_mid),
            "noise_high": total_energy(self.noise_high),
        }

    def summary(self) -> dict:
        return {
            "f1": self.f1,
            "strong_harmonics": self.strong_harmonics,
            "weak_harmonics": self.weak_harmonics,
            "objects_per_harmonic": {str(h): len(o) for h, o in sorted(self.harmonics.items()) if o},
            "subharmonics": len(self.subharmonics),
            "noise": {"low": len(self.noise_low), "mid": len(self.noise_mid), "high": len(self.noise_high)},
            "energy": self.energy_partition(),
            "e_total": self.e_total,
        }


def harmonic_number(freq: float, f1: float) -> int | None:
    h = int(round(freq / f1))
    if 1 <= h <= MAX_HARMONIC and abs(freq - h * f1) <= HARMONIC_TOL * h * f1:
        return h
    return None


def group_objects(all_objects: Sequence[SoundObject], f1: float) -> HarmonicGrouping:
    """Assign every object to a harmonic, the subharmonics, or a noise band."""
    significant = {id(o) for o in select_significant(all_objects)}
    grouping = HarmonicGrouping(f1=f1, e_total=total_energy(all_objects))
    for obj in all_objects:
        f = obj.mean_frequency
        h = harmonic_number(f, f1)
        if h is not None:
            grouping.harmonics.setdefault(h, []).append(obj)
        elif id(obj) in significant:
            grouping.subharmonics.append(obj)
        elif f < LOW_NOISE_HZ:
            grouping.noise_low.append(obj)
        elif f <= HIGH_NOISE_HZ:
            grouping.noise_mid.append(obj)
        else:
            grouping.noise_high.append(obj)
    return grouping
