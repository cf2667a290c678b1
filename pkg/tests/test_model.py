import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundobjects.errors import (
    AllAgesMissing,
    ClassTooSmall,
    SingleClassEvaluationSet,
    SingleClassTrainingSet,
)
from soundobjects.features.biomarkers import FEATURE_NAMES, BiomarkerVector
from soundobjects.model import (
    ALL_FEATURES,
    SFLRE,
    FittedSFLRE,
    LabeledDataset,
    cross_validate,
    evaluate,
    fit_sflre,
    impute_age,
    predict_sflre,
    read_dataset_csv,
    roc_auc,
    scenario_dataset,
    stratified_kfold,
    table3_summary,
    threshold_from_prevalence,
    write_dataset_csv,
)


def vec(values=None, age=None, gender=None, **kw):
    base = {name: 0.0 for name in FEATURE_NAMES}
    if values is not None:
        base.update(dict(zip(FEATURE_NAMES, values)))
    base.update(kw)
    return BiomarkerVector(**base, age=age, gender=gender)


def clouds(n_neg, n_pos, shift, seed=0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.zeros(n_neg, int), np.ones(n_pos, int)]
    vs = [vec(rng.normal(shift * yi, 1.0, len(FEATURE_NAMES)), age=60.0) for yi in y]
    return LabeledDataset(vs, y)


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    credit = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return credit / (len(pos) * len(neg))


class TestImpute:
    def test_mean_of_known(self):
        ds = LabeledDataset([vec(age=40.0), vec(age=60.0), vec(age=None)], [0, 1, 0])
        out = impute_age(ds)
        assert [v.age for v in out.vectors] == [40.0, 60.0, 50.0]

    def test_identity_when_complete(self):
        ds = LabeledDataset([vec(age=40.0), vec(age=60.0)], [0, 1])
        assert impute_age(ds) is ds

    def test_train_mean_only(self):
        train = LabeledDataset([vec(age=40.0), vec(age=60.0)], [0, 1])
        test = LabeledDataset([vec(age=None), vec(age=90.0)], [0, 1])
        _, t2 = impute_age(train, test)
        assert t2.vectors[0].age == 50.0

    def test_all_missing(self):
        with pytest.raises(AllAgesMissing):
            impute_age(LabeledDataset([vec(), vec()], [0, 1]))


class TestSFLRE:
    def test_perfect_regressor(self):
        y = np.array([0, 0, 1, 1, 0, 1])
        ds = LabeledDataset([vec(amp_std=float(v)) for v in y], y)
        m = fit_sflre(ds)
        j = FEATURE_NAMES.index("amp_std")
        sub = m.sub_predictions(ds.matrix())[:, j]
        assert np.allclose(sub, y)

    def test_zero_variance_is_prevalence(self):
        y = np.array([0, 0, 0, 1, 1])
        ds = LabeledDataset([vec() for _ in y], y)
        m = fit_sflre(ds)
        assert np.all(m.slopes == 0)
        assert np.allclose(m.intercepts, 0.4)

    def test_hand_computed_ols(self):
        # x = [1,2,3,4], y = [0,0,1,1]: slope = 2/5, intercept = 0.5 - 0.4*2.5 = -0.5
        # x = [2,0,1,3], y same: sxy = 0.75+0.75... computed below by hand
        X = np.array([[1.0, 2.0], [2.0, 0.0], [3.0, 1.0], [4.0, 3.0]])
        y = np.array([0, 0, 1, 1])
        ds = LabeledDataset([vec(amp_std=a, shimmer=b) for a, b in X], y)
        m = fit_sflre(ds, features=("amp_std", "shimmer"))
        assert m.slopes[0] == pytest.approx(0.4, abs=1e-9)
        assert m.intercepts[0] == pytest.approx(-0.5, abs=1e-9)
        # second column: mean 1.5, centered [0.5,-1.5,-0.5,1.5], y centered [-.5,-.5,.5,.5]
        # sxy = -0.25+0.75-0.25+0.75 = 1.0, sxx = 0.25+2.25+0.25+2.25 = 5.0
        assert m.slopes[1] == pytest.approx(0.2, abs=1e-9)
        assert m.intercepts[1] == pytest.approx(0.5 - 0.2 * 1.5, abs=1e-9)

    def test_single_class(self):
        with pytest.raises(SingleClassTrainingSet):
            fit_sflre(LabeledDataset([vec(), vec(), vec()], [1, 1, 1]))
        with pytest.raises(SingleClassTrainingSet):
            fit_sflre(LabeledDataset([vec(), vec(), vec()], [1, 1, 0]))

    def test_prediction_is_clamped_mean(self):
        m = FittedSFLRE(("amp_std", "shimmer"), np.zeros(2), np.array([0.2, 0.8]))
        assert predict_sflre(m, vec()) == pytest.approx(0.5)
        m = FittedSFLRE(("amp_std",), np.array([1.0]), np.array([0.0]))
        assert predict_sflre(m, vec(amp_std=5.0)) == 1.0
        assert predict_sflre(m, vec(amp_std=-5.0)) == 0.0

    def test_feature_switch(self):
        ds = clouds(10, 10, 1.0)
        ds = LabeledDataset([replace(v, gender="male" if i % 2 else "female") for i, v in enumerate(ds.vectors)], ds.labels)
        assert len(fit_sflre(ds).slopes) == 14
        assert len(fit_sflre(ds, ALL_FEATURES).slopes) == 16

    def test_separable_auc(self):
        ds = clouds(60, 60, 2.0)
        m = fit_sflre(ds)
        p = m.predict_proba(ds.matrix())
        assert brute_auc(p, ds.labels) >= 0.95

    def test_row_order_invariance(self):
        ds = clouds(30, 20, 1.0, seed=3)
        perm = np.random.default_rng(0).permutation(len(ds))
        a, b = fit_sflre(ds), fit_sflre(ds.subset(perm))
        assert np.allclose(a.slopes, b.slopes, rtol=1e-12, atol=1e-15)
        assert np.allclose(a.intercepts, b.intercepts, rtol=1e-12, atol=1e-15)

    def test_protocol_wrapper(self):
        ds = clouds(20, 20, 1.0)
        clf = SFLRE().fit(ds.matrix(), ds.labels)
        assert clf.predict_proba(ds.matrix()).shape == (40,)


class TestThreshold:
    def test_values(self):
        assert threshold_from_prevalence(np.r_[np.ones(34), np.zeros(186)]) == pytest.approx(0.1545, abs=1e-4)
        assert threshold_from_prevalence(np.r_[np.ones(46), np.zeros(186)]) == pytest.approx(0.1983, abs=1e-4)
        assert threshold_from_prevalence(np.array([0, 1, 0, 1])) == 0.5


class TestFolds:
    def test_balanced_small(self):
        y = np.r_[np.zeros(5, int), np.ones(5, int)]
        for _, test in stratified_kfold(y, 5, seed=1):
            assert sorted(y[test].tolist()) == [0, 1]

    def test_266_rows(self):
        y = np.r_[np.zeros(186, int), np.ones(80, int)]
        folds = stratified_kfold(y, 5, seed=3)
        assert [int(y[te].sum()) for _, te in folds] == [16] * 5

    @settings(max_examples=60, deadline=None)
    @given(st.integers(5, 120), st.integers(5, 120), st.integers(2, 5), st.integers(0, 10**6))
    def test_properties(self, n0, n1, k, seed):
        y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
        y = np.random.default_rng(seed).permutation(y)
        folds = stratified_kfold(y, k, seed)
        tests = np.concatenate([te for _, te in folds])
        assert sorted(tests.tolist()) == list(range(len(y)))
        for tr, te in folds:
            assert not set(tr) & set(te)
            assert abs(int(y[te].sum()) - n1 / k) < 1 + 1e-9
            assert abs(int((y[te] == 0).sum()) - n0 / k) < 1 + 1e-9
        assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, stratified_kfold(y, k, seed)))

    def test_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            stratified_kfold(np.r_[np.zeros(10, int), np.ones(3, int)], 5, 0)


class TestEvaluate:
    def test_perfect(self):
        assert evaluate([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 0.5).roc_auc == 1.0

    def test_constant_one(self):
        m = evaluate([1.0] * 6, [0, 0, 0, 1, 1, 1], 0.3)
        assert (m.sensitivity, m.specificity) == (1.0, 0.0)
        assert m.roc_auc == 0.5

    def test_hand_case(self):
        scores = [0.9, 0.8, 0.7, 0.4, 0.3, 0.1]
        labels = [1, 0, 1, 0, 1, 0]
        # pairs (pos > neg): 0.9 beats 3, 0.7 beats 2, 0.3 beats 1 -> 6 of 9
        assert evaluate(scores, labels, 0.5).roc_auc == pytest.approx(6 / 9)
        assert brute_auc(scores, labels) == pytest.approx(6 / 9)

    def test_f1_zero_when_undefined(self):
        m = evaluate([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1], 0.9)
        assert m.f1 == 0.0 and m.sensitivity == 0.0

    def test_single_class(self):
        with pytest.raises(SingleClassEvaluationSet):
            evaluate([0.1, 0.2], [1, 1], 0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 1)), min_size=2, max_size=200), st.floats(0, 1))
    def test_matches_brute_force_and_identities(self, pairs, thr):
        scores = [s / 10 for s, _ in pairs]
        labels = [y for _, y in pairs]
        if len(set(labels)) < 2:
            return
        m = evaluate(scores, labels, thr)
        assert m.roc_auc == brute_auc(scores, labels)
        n = len(labels)
        assert m.tp + m.fp + m.tn + m.fn == n
        assert m.accuracy == pytest.approx((m.tp + m.tn) / n)
        prec = m.tp / (m.tp + m.fp) if m.tp + m.fp else 0.0
        expected_f1 = 2 * prec * m.sensitivity / (prec + m.sensitivity) if prec + m.sensitivity else 0.0
        assert m.f1 == pytest.approx(expected_f1)


class TestCrossValidate:
    def test_fifty_runs_and_separable(self):
        res = cross_validate(clouds(80, 40, 2.0), k=5, seeds=range(1, 11))
        assert len(res.runs) == 50
        assert [(r.seed, r.fold) for r in res.runs] == [(s, f) for s in range(1, 11) for f in range(5)]
        assert res.mean()["roc_auc"] >= 0.95
        assert min(r.metrics.roc_auc for r in res.runs) >= 0.85

    def test_constant_features(self):
        y = np.r_[np.zeros(30, int), np.ones(20, int)]
        res = cross_validate(LabeledDataset([vec(age=50.0) for _ in y], y), 5, range(1, 4))
        assert all(r.metrics.roc_auc == 0.5 for r in res.runs)

    def test_threshold_is_per_training_fold(self):
        res = cross_validate(clouds(47, 23, 1.0), 5, [1])
        for r in res.runs:
            assert r.threshold == pytest.approx((23 - r.n_test_positive) / r.n_train)

    def test_no_leakage(self):
        ds = clouds(40, 20, 1.0, seed=5)
        ds = LabeledDataset([replace(v, age=None if i % 4 == 0 else 50.0 + i) for i, v in enumerate(ds.vectors)], ds.labels)
        tr, te = stratified_kfold(ds, 5, 1)[0]
        train = ds.subset(tr)
        ref_train, _ = impute_age(train, ds.subset(te))
        m1 = fit_sflre(ref_train, ALL_FEATURES[:-2] + ("age",))
        # scramble every test row; the fitted model and threshold must not move
        mutated = list(ds.vectors)
        for i in te:
            mutated[i] = vec(np.full(14, 1e6), age=None if i % 2 else 999.0)
        ds2 = LabeledDataset(mutated, ds.labels)
        train2, _ = impute_age(ds2.subset(tr), ds2.subset(te))
        m2 = fit_sflre(train2, ALL_FEATURES[:-2] + ("age",))
        assert np.array_equal(m1.slopes, m2.slopes) and np.array_equal(m1.intercepts, m2.intercepts)
        assert threshold_from_prevalence(ds.subset(tr)) == threshold_from_prevalence(ds2.subset(tr))

    def test_parallel_equals_serial(self):
        ds = clouds(30, 20, 1.0)
        a = cross_validate(ds, 5, [1, 2])
        b = cross_validate(ds, 5, [1, 2], jobs=2)
        assert a.to_dict() == b.to_dict()

    def test_summary(self):
        res = cross_validate(clouds(30, 20, 1.0), 5, [1, 2])
        text = table3_summary([res])
        assert "ROC AUC" in text and "(10 runs)" in text
        assert res.to_dict()["schema_version"] == 1


class TestDatasetIO:
    def test_roundtrip_and_scenarios(self, tmp_path):
        rows = []
        for i, label in enumerate(["healthy", "mci", "alzheimers", "healthy", "AD"]):
            rows.append((f"r{i}", vec(np.arange(14) + i, age=None if i == 0 else 60.0 + i, gender="female"), label))
        assert write_dataset_csv(tmp_path / "d.csv", rows) == 5
        back = read_dataset_csv(tmp_path / "d.csv")
        assert back[0].vector.age is None and back[1].vector.age == 61.0
        assert back[2].vector.as_array().tolist() == (np.arange(14) + 2).tolist()
        assert scenario_dataset(back, "healthy-vs-MCI").labels.tolist() == [0, 1, 0]
        assert scenario_dataset(back, "healthy-vs-MCI&AD").labels.tolist() == [0, 1, 1, 0, 1]
        assert scenario_dataset(back, "healthy-vs-AD").labels.tolist() == [0, 1, 0, 1]
        assert scenario_dataset(back, "MCI-vs-AD").labels.tolist() == [0, 1, 1]

    def test_gender_encoding(self):
        assert vec(gender="male").value("gender") == 1.0
        assert math.isnan(vec().value("age"))
