"""Group quartiles of the biomarkers and placement of a measured vector."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .biomarkers import FEATURE_NAMES, BiomarkerVector

ENV_VAR = "SOUNDOBJECTS_REFERENCE"
GROUPS = ("healthy", "mci", "alzheimers")


@dataclass(frozen=True)
class Quartiles:
    q1: float
    median: float
    q3: float

    def contains(self, value: float) -> bool:
        return self.q1 <= value <= self.q3


@dataclass(frozen=True)
class ReferenceRanges:
    cells: dict[str, dict[str, Quartiles]]

    def __getitem__(self, feature: str) -> dict[str, Quartiles]:
        return self.cells[feature]

    @classmethod
    def from_dict(cls, doc: dict) -> "ReferenceRanges":
        cells = {}
        for feature, groups in doc["features"].items():
            cells[feature] = {}
            for group, triple in groups.items():
                # some rows are printed largest-first; keep the interval ordered
                lo, mid, hi = sorted(float(v) for v in triple)
                cells[feature][group] = Quartiles(lo, mid, hi)
        return cls(cells)


def default_path() -> Path | None:
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else None


def load_reference(path: str | os.PathLike | None = None) -> ReferenceRanges:
    """Load quartiles from `path`, the env var, or the bundled table."""
    path = path or default_path()
    if path is None:
        text = resources.files("soundobjects.data").joinpath("quartiles.json").read_text()
    else:
        text = Path(path).read_text()
    return ReferenceRanges.from_dict(json.loads(text))


def compare_to_reference(v: BiomarkerVector | dict, ranges: ReferenceRanges) -> dict[str, dict]:
    """For each feature, the groups whose [q1, q3] contains the value."""
    values = v.features() if isinstance(v, BiomarkerVector) else v
    report = {}
    for name in FEATURE_NAMES:
        if name not in values or name not in ranges.cells:
            continue
        value = float(values[name])
        inside = [g for g, q in ranges[name].items() if q.contains(value)]
        report[name] = {"value": value, "groups": inside if inside else ["outside all"]}
    return report
