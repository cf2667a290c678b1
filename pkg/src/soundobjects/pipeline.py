"""Recording -> filter bank -> sound objects -> biomarkers, in one call."""

from __future__ import annotations

from dataclasses import dataclass, field

from .audio_io import Recording, validate_recording
from .errors import InsufficientShiftSamples
from .features import (
    BiomarkerVector,
    HarmonicGrouping,
    PhaseStats,
    biomarkers,
    find_fundamental,
    group_objects,
    harmonic_shift_series,
    local_windows,
    phase_stats,
    select_significant,
)
from .features.phase import fundamental_zero_times
from .filterbank import SETTLING_S, FilterBank, analyze, design_bank
from .tracker import SoundObject, track_objects

SCHEMA_VERSION = 1
EDGE_SIGMAS = 2.0


@dataclass
class Analysis:
    recording: Recording
    objects: list[SoundObject]
    grouping: HarmonicGrouping
    phase: PhaseStats | None
    vector: BiomarkerVector
    shifts: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "source_id": self.recording.source_id,
            "features": self.vector.features(),
            "flags": list(self.vector.flags),
            "warnings": self.warnings,
            "grouping": self.grouping.summary(),
            "phase": self.phase.to_dict() if self.phase else None,
            "slope_units": "percent of mean per second",
            "local_windows": local_windows(self.grouping, self.recording.duration, self.shifts),
        }


def bank_for(rec: Recording) -> FilterBank:
    return design_bank(rec.sample_rate)


def extract_objects(rec: Recording, bank: FilterBank | None = None) -> list[SoundObject]:
    bank = bank or bank_for(rec)
    spectrum = analyze(bank, rec)
    objects = track_objects(spectrum, bank)
    del spectrum
    return objects


def analyze_objects(rec: Recording, objects: list[SoundObject]) -> Analysis:
    """Stages two to four on already-tracked objects.

    Raises `NoHarmonicStructure` when no fundamental can be found.
    """
    selected = select_significant(objects)
    fundamental = find_fundamental(selected)
    grouping = group_objects(objects, fundamental.f1)

    shifts = {}
    phase = None
    others = [h for h in grouping.strong_harmonics if h != 1]
    if others and grouping.harmonics.get(1):
        # the F1 band is the slowest one to settle; keep two envelope widths clear
        bank = bank_for(rec)
        margin = max(SETTLING_S, EDGE_SIGMAS * float(bank.envelope_sigma(bank.nearest(grouping.f1))) / rec.sample_rate)
        window = (margin, max(margin, rec.duration - margin))
        zeros = fundamental_zero_times(grouping, window)
        for h in others:
            s = harmonic_shift_series(grouping, h, window, zero_times=zeros)
            shifts[h] = (s.times, s.shifts)
        try:
            phase = phase_stats({h: s for h, (_, s) in shifts.items()})
        except InsufficientShiftSamples:
            phase = None
    vector = biomarkers(objects, grouping, phase)
    return Analysis(rec, objects, grouping, phase, vector, shifts,
                    validate_recording(rec).codes)


def analyze_recording(rec: Recording, bank: FilterBank | None = None) -> Analysis:
    return analyze_objects(rec, extract_objects(rec, bank))
