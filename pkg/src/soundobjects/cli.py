"""Command-line entry point: analyze, batch, cv, synth, report."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import model
from .audio_io import load_wav, write_wav
from .errors import (
    DatasetError,
    MissingLabel,
    NoFundamental,
    NoHarmonicStructure,
    NoStrongHarmonics,
    SoundObjectsError,
)
from .features import compare_to_reference, load_reference
from .features.biomarkers import FEATURE_NAMES, BiomarkerVector
from .filterbank import analyze as analyze_bands
from .filterbank import dump_band_csv
from .pipeline import SCHEMA_VERSION, analyze_objects, bank_for
from .synth import SynthSpec, generate, grid, spec_from_dict, spec_to_dict, write_truth
from .tracker import dump_objects, reconstruct, reproduction_score, track_objects

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_USAGE = 3
DOMAIN_ERRORS = (NoHarmonicStructure, NoStrongHarmonics, NoFundamental)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for domain failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, EXIT_USAGE)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str, code: int, **extra) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "error": kind, "message": message, "exit_code": code}
    doc.update(extra)
    print(json.dumps(doc), file=sys.stderr)


def _write_json(path: str | Path, doc: dict) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(json.dumps(doc, indent=2, default=float))
    tmp.replace(path)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _require_parent(path: str | None) -> None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise UsageError(f"output directory does not exist: {Path(path).parent}")


def parse_seeds(text: str) -> list[int]:
    """'1..10', '3', or '1,4,9'."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise UsageError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


# ---------------------------------------------------------------- analyze

def cmd_analyze(args) -> int:
    wav = _require_file(args.wav)
    for p in (args.json, args.objects, args.wav_out):
        _require_parent(p)
    if args.bands is not None:
        Path(args.bands).mkdir(parents=True, exist_ok=True)

    rec = load_wav(wav)
    rec = replace(rec, source_id=rec.source_id or wav.stem)
    bank = bank_for(rec)
    spectrum = analyze_bands(bank, rec)
    objects = track_objects(spectrum, bank)

    if args.objects:
        _write_json(args.objects, dump_objects(objects))
    rebuilt = None
    if args.wav_out:
        rebuilt = reconstruct(objects, rec.sample_rate, rec.duration)
        write_wav(args.wav_out, rebuilt)

    try:
        result = analyze_objects(rec, objects)
    except DOMAIN_ERRORS:
        del spectrum
        raise

    if args.bands is not None:
        f1 = result.grouping.f1
        for h in result.grouping.strong_harmonics:
            k = bank.nearest(h * f1)
            dump_band_csv(spectrum, k, Path(args.bands) / f"band_h{h:02d}_k{k:03d}.csv")
    del spectrum

    report = result.report()
    if rebuilt is not None:
        report["reproduction_score"] = reproduction_score(rec, rebuilt)
        harm = result.grouping.members(result.grouping.harmonics.keys())
        report["harmonic_reproduction_score"] = reproduction_score(
            rec, reconstruct(harm, rec.sample_rate, rec.duration))
    if args.reference is not None:
        ranges = load_reference(args.reference or None)
        report["reference"] = compare_to_reference(result.vector, ranges)

    if args.json:
        _write_json(args.json, report)
    else:
        json.dump(report, sys.stdout, indent=2, default=float)
        sys.stdout.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------- batch

def read_labels(path: str | Path) -> dict[str, dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "source_id" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise DatasetError(f"{path}: needs source_id and label columns")
        out = {}
        for row in reader:
            age = (row.get("age") or "").strip()
            out[row["source_id"].strip()] = {
                "label": row["label"].strip(),
                "gender": (row.get("gender") or "").strip().lower() or None,
                "age": float(age) if age else None,
            }
    return out


def _analyze_file(path: str) -> tuple[str, dict | None, dict | None]:
    sid = Path(path).stem
    try:
        rec = load_wav(path)
        bank = bank_for(rec)
        objects = track_objects(analyze_bands(bank, rec), bank)
        result = analyze_objects(rec, objects)
        return sid, result.vector.features(), None
    except SoundObjectsError as exc:
        return sid, None, {"source_id": sid, "path": path, "error": type(exc).__name__, "message": str(exc)}
    except (OSError, ValueError) as exc:
        return sid, None, {"source_id": sid, "path": path, "error": type(exc).__name__, "message": str(exc)}


def cmd_batch(args) -> int:
    folder = Path(args.directory)
    if not folder.is_dir():
        raise UsageError(f"not a directory: {folder}")
    labels = read_labels(_require_file(args.labels))
    _require_parent(args.out)
    failures_path = Path(args.failures or f"{args.out}.failures.json")

    wavs = sorted(str(p) for p in folder.rglob("*.wav"))
    failures = []
    todo = []
    for w in wavs:
        sid = Path(w).stem
        if sid not in labels:
            failures.append({"source_id": sid, "path": w, "error": MissingLabel.__name__, "message": "no label row"})
        else:
            todo.append(w)

    if args.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_analyze_file, todo))
    else:
        results = [_analyze_file(w) for w in todo]

    rows = []
    for sid, feats, err in results:
        if err is not None:
            failures.append(err)
            continue
        meta = labels[sid]
        v = BiomarkerVector(**feats, gender=meta["gender"], age=meta["age"])
        rows.append((sid, v, meta["label"]))
    n = model.write_dataset_csv(args.out, rows)
    failures.sort(key=lambda f: f["source_id"])
    _write_json(failures_path, {"schema_version": SCHEMA_VERSION, "n_ok": n, "n_failed": len(failures), "failures": failures})
    print(json.dumps({"rows": n, "failures": len(failures), "dataset": str(args.out), "failure_report": str(failures_path)}))
    return EXIT_OK


# ---------------------------------------------------------------- cv

def cmd_cv(args) -> int:
    rows = model.read_dataset_csv(_require_file(args.dataset))
    _require_parent(args.json)
    seeds = parse_seeds(args.seeds)
    features = model.ALL_FEATURES if args.features == 16 else FEATURE_NAMES
    scenarios = list(model.SCENARIOS) if args.scenario == "all" else [args.scenario]
    results = []
    for sc in scenarios:
        ds = model.scenario_dataset(rows, sc)
        if len(set(ds.labels.tolist())) < 2:
            raise model.SingleClassTrainingSet(f"scenario {sc}: dataset holds a single class")
        results.append(model.cross_validate(ds, args.k, seeds, features=features, jobs=args.jobs))
    doc = results[0].to_dict() if len(results) == 1 else {
        "schema_version": model.SCHEMA_VERSION,
        "results": [r.to_dict() for r in results],
    }
    if args.json:
        _write_json(args.json, doc)
    print(model.table3_summary(results))
    return EXIT_OK


# ---------------------------------------------------------------- synth

_SPEC_FIELDS = {
    "f0": float, "n_harmonics": int, "jitter_pct": float, "shimmer_pct": float,
    "f0_slope_pct_per_s": float, "amp_slope_pct_per_s": float, "phase_walk_sigma": float,
    "phase_noise_sigma": float, "noise_snr_db": float, "duration": float,
    "sample_rate": int, "seed": int,
}


def parse_grid(items: Sequence[str]) -> dict[str, list]:
    """['jitter_pct=0.03,0.06', 'seed=1..3'] -> axes."""
    axes = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"grid axis must look like name=v1,v2: {item!r}")
        name, values = item.split("=", 1)
        name = name.strip()
        if name not in _SPEC_FIELDS:
            raise UsageError(f"unknown grid field {name!r}")
        cast = _SPEC_FIELDS[name]
        if cast is int and ".." in values:
            axes[name] = parse_seeds(values)
        else:
            axes[name] = [cast(v) for v in values.split(",") if v.strip()]
    return axes


def _spec_from_args(args) -> SynthSpec:
    d = spec_to_dict(SynthSpec())
    if args.spec:
        d.update(json.loads(_require_file(args.spec).read_text()))
    for name in _SPEC_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if args.harmonic_amps:
        d["harmonic_amps"] = [float(x) for x in args.harmonic_amps.split(",")]
    if args.break_times:
        d["break_times"] = [float(x) for x in args.break_times.split(",")]
    spec = spec_from_dict(d)
    spec.validate()
    return spec


def cmd_synth(args) -> int:
    out = Path(args.out)
    base = _spec_from_args(args)
    if not args.grid:
        _require_parent(str(out))
        rec, truth = generate(base)
        write_wav(out, rec)
        write_truth(out.with_suffix(".json"), base, truth)
        print(json.dumps({"wav": str(out), "truth": str(out.with_suffix(".json"))}))
        return EXIT_OK

    specs = grid(base, **parse_grid(args.grid))
    for s in specs:
        s.validate()
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    label_rows = []
    width = len(str(len(specs)))
    for i, s in enumerate(specs):
        sid = f"synth_{i:0{width}d}"
        rec, truth = generate(s)
        write_wav(out / f"{sid}.wav", rec)
        write_truth(out / f"{sid}.json", s, truth)
        manifest.append({"source_id": sid, "spec": spec_to_dict(s)})
        label_rows.append((sid, args.label, args.gender or "", "" if args.age is None else args.age))
    _write_json(out / "manifest.json", {"schema_version": SCHEMA_VERSION, "n": len(specs), "items": manifest})
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source_id", "label", "gender", "age"])
        w.writerows(label_rows)
    print(json.dumps({"directory": str(out), "n": len(specs)}))
    return EXIT_OK


# ---------------------------------------------------------------- report

def cmd_report(args) -> int:
    doc = json.loads(_require_file(args.report).read_text())
    if "features" not in doc:
        raise DatasetError(f"{args.report}: not a feature report")
    ranges = load_reference(args.reference or None)
    placement = compare_to_reference(doc["features"], ranges)
    if args.json:
        _write_json(args.json, {"schema_version": SCHEMA_VERSION, "source_id": doc.get("source_id", ""),
                                "reference": placement})
    print(f"source: {doc.get('source_id', '')}")
    print(f"{'feature':<14} {'value':>12}  groups")
    for name in FEATURE_NAMES:
        if name in placement:
            p = placement[name]
            print(f"{name:<14} {p['value']:>12.4g}  {', '.join(p['groups'])}")
    if doc.get("flags"):
        print("flags: " + ", ".join(doc["flags"]))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="soundobjects", description="Sound-object voice biomarkers for dementia screening.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="extract the 14 biomarkers from one WAV file")
    a.add_argument("wav")
    a.add_argument("--json", help="write the feature report here instead of stdout")
    a.add_argument("--objects", help="dump tracked sound objects as JSON")
    a.add_argument("--bands", metavar="DIR", help="write one band CSV per strong harmonic into DIR")
    a.add_argument("--wav", dest="wav_out", metavar="OUT", help="write the object resynthesis as WAV")
    a.add_argument("--reference", nargs="?", const="", default=None,
                   help="add quartile placement; optional path to a reference table "
                        "(defaults to $SOUNDOBJECTS_REFERENCE or the bundled table)")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("batch", help="analyze a directory of WAVs into a dataset CSV")
    b.add_argument("directory")
    b.add_argument("--labels", required=True, help="CSV with source_id,label[,gender,age]")
    b.add_argument("--out", required=True, help="dataset CSV to write")
    b.add_argument("--failures", help="failure report path (default: <out>.failures.json)")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_batch)

    c = sub.add_parser("cv", help="repeated stratified cross-validation of SFLRE")
    c.add_argument("dataset")
    c.add_argument("--scenario", default="healthy-vs-MCI&AD", choices=list(model.SCENARIOS) + ["all"])
    c.add_argument("--k", type=int, default=5)
    c.add_argument("--seeds", default="1..10", help="e.g. 1..10 or 1,2,3")
    c.add_argument("--features", type=int, choices=(14, 16), default=14,
                   help="16 adds gender and age to the ensemble")
    c.add_argument("--json", help="write metrics JSON here")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_cv)

    s = sub.add_parser("synth", help="generate oracle vowels with ground truth")
    s.add_argument("--out", required=True, help="WAV path, or a directory with --grid")
    s.add_argument("--spec", help="JSON file with SynthSpec fields")
    for name, cast in _SPEC_FIELDS.items():
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=cast)
    s.add_argument("--harmonic-amps", help="comma-separated relative amplitudes")
    s.add_argument("--break-times", help="comma-separated seconds")
    s.add_argument("--grid", nargs="+", metavar="FIELD=V1,V2", help="sweep fields into a corpus directory")
    s.add_argument("--label", default="healthy", help="label written to the corpus labels.csv")
    s.add_argument("--gender", choices=("female", "male"))
    s.add_argument("--age", type=float)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("report", help="place an analyze JSON against reference quartiles")
    r.add_argument("report")
    r.add_argument("--reference", help="reference table path (default: env var or bundled)")
    r.add_argument("--json", help="write placement JSON here")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_DOMAIN)
        return EXIT_DOMAIN
    except (SoundObjectsError, UsageError) as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_USAGE)
        return EXIT_USAGE
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_USAGE)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
