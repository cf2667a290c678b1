"""SFLRE classifier, prevalence threshold, stratified CV and screening metrics."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    AllAgesMissing,
    ClassTooSmall,
    DatasetError,
    SingleClassEvaluationSet,
    SingleClassTrainingSet,
)
from .features.biomarkers import FEATURE_NAMES, BiomarkerVector

SCHEMA_VERSION = 1
ALL_FEATURES = FEATURE_NAMES + ("gender", "age")

GROUPS = ("healthy", "mci", "alzheimers")
# scenario -> (negative groups, positive groups)
SCENARIOS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "healthy-vs-MCI": (("healthy",), ("mci",)),
    "healthy-vs-MCI&AD": (("healthy",), ("mci", "alzheimers")),
    "healthy-vs-AD": (("healthy",), ("alzheimers",)),
    "MCI-vs-AD": (("mci",), ("alzheimers",)),
}
_GROUP_ALIASES = {
    "healthy": "healthy", "control": "healthy", "hc": "healthy",
    "mci": "mci",
    "alzheimers": "alzheimers", "alzheimer": "alzheimers", "ad": "alzheimers",
}


def normalize_group(label: str) -> str:
    key = label.strip().lower().replace("'", "")
    if key not in _GROUP_ALIASES:
        raise DatasetError(f"unknown diagnosis label {label!r}")
    return _GROUP_ALIASES[key]


@dataclass
class LabeledDataset:
    vectors: list[BiomarkerVector]
    labels: np.ndarray
    source_ids: list[str] = field(default_factory=list)
    scenario: str = "custom"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.vectors) != len(self.labels):
            raise DatasetError("vectors and labels differ in length")
        if not self.source_ids:
            self.source_ids = [str(i) for i in range(len(self.vectors))]

    def __len__(self) -> int:
        return len(self.vectors)

    def subset(self, idx: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            [self.vectors[i] for i in idx],
            self.labels[idx],
            [self.source_ids[i] for i in idx],
            self.scenario,
        )

    def matrix(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        if not self.vectors:
            return np.empty((0, len(names)))
        return np.vstack([v.as_array(names) for v in self.vectors])

    @property
    def prevalence(self) -> float:
        return float(self.labels.mean()) if len(self.labels) else math.nan


# ---------------------------------------------------------------- datasets

CSV_COLUMNS = ("source_id",) + FEATURE_NAMES + ("gender", "age", "label")


def write_dataset_csv(path: str | Path, rows: Iterable[tuple[str, BiomarkerVector, str]]) -> int:
    """Write (source_id, vector, label) rows; returns the row count."""
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    n = 0
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for sid, v, label in rows:
            feats = v.features()
            w.writerow(
                [sid]
                + [repr(feats[name]) for name in FEATURE_NAMES]
                + [v.gender or "", "" if v.age is None else repr(float(v.age)), label]
            )
            n += 1
    tmp.replace(path)
    return n


@dataclass
class DatasetRow:
    source_id: str
    vector: BiomarkerVector
    label: str


def read_dataset_csv(path: str | Path) -> list[DatasetRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        for line, rec in enumerate(reader, start=2):
            try:
                feats = {name: float(rec[name]) for name in FEATURE_NAMES}
            except ValueError as exc:
                raise DatasetError(f"{path}:{line}: {exc}") from None
            gender = rec["gender"].strip().lower() or None
            age = float(rec["age"]) if rec["age"].strip() else None
            rows.append(DatasetRow(rec["source_id"], BiomarkerVector(**feats, gender=gender, age=age), rec["label"].strip()))
    return rows


def scenario_dataset(rows: Sequence[DatasetRow], scenario: str) -> LabeledDataset:
    """Binary dataset for one of the four screening scenarios.

    Labels may be diagnosis names or already binary 0/1; binary labels are
    used as they are.
    """
    if scenario not in SCENARIOS:
        raise DatasetError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    neg, pos = SCENARIOS[scenario]
    vectors, labels, ids = [], [], []
    for r in rows:
        if r.label in ("0", "1"):
            y = int(r.label)
        else:
            g = normalize_group(r.label)
            if g in neg:
                y = 0
            elif g in pos:
                y = 1
            else:
                continue
        vectors.append(r.vector)
        labels.append(y)
        ids.append(r.source_id)
    return LabeledDataset(vectors, np.array(labels, dtype=np.int64), ids, scenario)


# ---------------------------------------------------------------- imputation

def impute_age(train: LabeledDataset, test: LabeledDataset | None = None):
    """Fill missing ages with the training-row mean.

    Returns the imputed training set, or a (train, test) pair when `test`
    is given; the test set never contributes to the mean.
    """
    ages = [v.age for v in train.vectors if v.age is not None and not math.isnan(v.age)]
    needs = any(v.age is None for v in train.vectors) or (
        test is not None and any(v.age is None for v in test.vectors)
    )
    if not needs:
        return train if test is None else (train, test)
    if not ages:
        raise AllAgesMissing("no training row has a known age")
    mean = float(np.mean(ages))

    def fill(ds: LabeledDataset) -> LabeledDataset:
        vs = [v if v.age is not None else replace(v, age=mean) for v in ds.vectors]
        return LabeledDataset(vs, ds.labels.copy(), list(ds.source_ids), ds.scenario)

    return fill(train) if test is None else (fill(train), fill(test))


# ---------------------------------------------------------------- SFLRE

class Classifier(Protocol):
    """Anything with fit / predict_proba over a feature matrix."""

    def fit(self, X: np.ndarray, y: np.ndarray) -> "Classifier": ...

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


@dataclass
class FittedSFLRE:
    features: tuple[str, ...]
    slopes: np.ndarray
    intercepts: np.ndarray

    def sub_predictions(self, X: np.ndarray) -> np.ndarray:
        return X * self.slopes[None, :] + self.intercepts[None, :]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.clip(self.sub_predictions(X).mean(axis=1), 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
        }


def _ols_columns(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xm = X.mean(axis=0)
    ym = y.mean()
    xc = X - xm
    sxx = np.einsum("ij,ij->j", xc, xc)
    sxy = xc.T @ (y - ym)
    # a column whose centered sum of squares vanishes relative to its scale
    # carries no information
    scale = np.maximum(np.abs(xm), 1.0) ** 2 * len(y)
    flat = sxx <= 1e-24 * scale
    slopes = np.where(flat, 0.0, sxy / np.where(flat, 1.0, sxx))
    intercepts = np.where(flat, ym, ym - slopes * xm)
    return slopes, intercepts


def fit_sflre_matrix(X: np.ndarray, y: np.ndarray, features: Sequence[str]) -> FittedSFLRE:
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if np.isnan(X).any():
        bad = [features[j] for j in np.flatnonzero(np.isnan(X).any(axis=0))]
        raise DatasetError(f"missing values in {bad}")
    counts = np.bincount(y.astype(np.int64), minlength=2)
    if (counts < 2).any():
        raise SingleClassTrainingSet(f"need >= 2 rows per class, got {counts.tolist()}")
    slopes, intercepts = _ols_columns(X, y)
    return FittedSFLRE(tuple(features), slopes, intercepts)


def fit_sflre(train: LabeledDataset, features: Sequence[str] = FEATURE_NAMES) -> FittedSFLRE:
    """One univariate least-squares line per feature, label regressed on value."""
    return fit_sflre_matrix(train.matrix(features), train.labels, features)


def predict_sflre(model: FittedSFLRE, v: BiomarkerVector) -> float:
    return float(model.predict_proba(v.as_array(model.features)[None, :])[0])


class SFLRE:
    """Classifier-protocol wrapper around the univariate ensemble."""

    def __init__(self, features: Sequence[str] = FEATURE_NAMES):
        self.features = tuple(features)
        self.fitted_: FittedSFLRE | None = None

    def fit(self, X, y):
        self.fitted_ = fit_sflre_matrix(X, y, self.features)
        return self

    def predict_proba(self, X):
        if self.fitted_ is None:
            raise RuntimeError("fit before predict")
        return self.fitted_.predict_proba(X)


def threshold_from_prevalence(train: LabeledDataset | np.ndarray) -> float:
    labels = train.labels if isinstance(train, LabeledDataset) else np.asarray(train)
    if len(labels) == 0:
        raise DatasetError("empty training set")
    return float(np.count_nonzero(labels == 1) / len(labels))


# ---------------------------------------------------------------- folds

def stratified_kfold(labels: LabeledDataset | np.ndarray, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic stratified k-fold; returns (train_idx, test_idx) pairs.

    Each class is shuffled and dealt into k near-equal chunks; the chunk
    offset rotates between classes so fold sizes stay balanced too.
    """
    y = labels.labels if isinstance(labels, LabeledDataset) else np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise ClassTooSmall(f"class {cls} has {len(idx)} rows, fewer than k={k}")
        idx = rng.permutation(idx)
        for j, chunk in enumerate(np.array_split(idx, k)):
            folds[(j + offset) % k].append(chunk)
        offset += len(idx) % k
    n = len(y)
    out = []
    for parts in folds:
        test = np.sort(np.concatenate(parts))
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        out.append((np.flatnonzero(mask), test))
    return out


# ---------------------------------------------------------------- metrics

@dataclass
class Metrics:
    roc_auc: float
    sensitivity: float
    specificity: float
    accuracy: float
    f1: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = ("roc_auc", "sensitivity", "specificity", "accuracy", "f1")


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC; tied scores earn half credit."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassEvaluationSet("AUC needs both classes")
    ranks = rankdata(scores)  # average ranks, so ties give x.5
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(probabilities, labels, threshold: float) -> Metrics:
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    auc = roc_auc(p, y)
    pred = p >= threshold
    pos = y == 1
    tp = int(np.count_nonzero(pred & pos))
    fn = int(np.count_nonzero(~pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    tn = int(np.count_nonzero(~pred & ~pos))
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    prec = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * prec * sens / (prec + sens) if prec + sens > 0 else 0.0
    return Metrics(auc, sens, spec, (tp + tn) / len(y), f1, tp, fp, tn, fn)


# ---------------------------------------------------------------- CV

@dataclass
class FoldRun:
    seed: int
    fold: int
    threshold: float
    n_train: int
    n_test: int
    n_test_positive: int
    metrics: Metrics

    def to_dict(self) -> dict:
        d = asdict(self)
        d["metrics"] = self.metrics.to_dict()
        return d


@dataclass
class CVResult:
    scenario: str
    model: str
    k: int
    seeds: list[int]
    runs: list[FoldRun]

    def mean(self) -> dict[str, float]:
        return {m: float(np.mean([getattr(r.metrics, m) for r in self.runs])) for m in METRIC_NAMES}

    def std(self) -> dict[str, float]:
        return {m: float(np.std([getattr(r.metrics, m) for r in self.runs])) for m in METRIC_NAMES}

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "model": self.model,
            "k": self.k,
            "seeds": self.seeds,
            "n_runs": len(self.runs),
            "runs": [r.to_dict() for r in self.runs],
            "mean": self.mean(),
            "std": self.std(),
        }


def _one_run(dataset: LabeledDataset, seed: int, fold: int, train_idx, test_idx,
             features: tuple[str, ...], factory: Callable[[], Classifier]) -> FoldRun:
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    if "age" in features:
        train, test = impute_age(train, test)
    clf = factory().fit(train.matrix(features), train.labels)
    thr = threshold_from_prevalence(train)
    probs = clf.predict_proba(test.matrix(features))
    m = evaluate(probs, test.labels, thr)
    return FoldRun(seed, fold, thr, len(train), len(test), int(test.labels.sum()), m)


def _run_star(args):
    return _one_run(*args)


def cross_validate(
    dataset: LabeledDataset,
    k: int = 5,
    seeds: Sequence[int] = tuple(range(1, 11)),
    features: Sequence[str] = FEATURE_NAMES,
    factory: Callable[[], Classifier] | None = None,
    model_name: str = "SFLRE",
    jobs: int = 1,
) -> CVResult:
    """Repeat stratified k-fold CV once per seed; runs come back ordered by (seed, fold)."""
    features = tuple(features)
    factory = factory or partial(SFLRE, features)
    tasks = []
    for seed in seeds:
        for fold, (tr, te) in enumerate(stratified_kfold(dataset, k, seed)):
            tasks.append((dataset, int(seed), fold, tr, te, features, factory))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_star, tasks))
    else:
        runs = [_run_star(t) for t in tasks]
    return CVResult(dataset.scenario, model_name, k, [int(s) for s in seeds], runs)


def table3_summary(results: Sequence[CVResult]) -> str:
    head = f"{'MODEL':<8} {'TARGET':<20} {'ROC AUC':>8} {'SENSITIVITY':>12} {'SPECIFICITY':>12} {'ACCURACY':>9} {'F1':>6}"
    lines = [head, "-" * len(head)]
    for r in results:
        m = r.mean()
        lines.append(
            f"{r.model:<8} {r.scenario:<20} {m['roc_auc']:>8.2f} {m['sensitivity']:>12.2f} "
            f"{m['specificity']:>12.2f} {m['accuracy']:>9.2f} {m['f1']:>6.2f}"
        )
    lines.append(f"({sum(len(r.runs) for r in results)} runs)")
    return "\n".join(lines)
