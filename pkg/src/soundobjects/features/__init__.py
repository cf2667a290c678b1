"""Four-stage analysis of sound objects into voice biomarkers."""

from .biomarkers import FEATURE_NAMES, BiomarkerVector, biomarkers, harmonic_tilt
from .grouping import (
    Fundamental,
    HarmonicGrouping,
    find_fundamental,
    group_objects,
    select_significant,
    total_energy,
)
from .local import local_windows
from .phase import PhaseStats, ShiftSeries, harmonic_shift_series, phase_stats
from .reference import ReferenceRanges, compare_to_reference, load_reference
from .stats import ObjectStats, object_stats

__all__ = [
    "FEATURE_NAMES",
    "BiomarkerVector",
    "Fundamental",
    "HarmonicGrouping",
    "ObjectStats",
    "PhaseStats",
    "ReferenceRanges",
    "ShiftSeries",
    "biomarkers",
    "compare_to_reference",
    "find_fundamental",
    "group_objects",
    "harmonic_shift_series",
    "harmonic_tilt",
    "load_reference",
    "local_windows",
    "object_stats",
    "phase_stats",
    "select_significant",
    "total_energy",
]
