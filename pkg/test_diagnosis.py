import numpy as np
import pytest
from numpy.testing import assert_allclose

from classifiers.base import Classifier
from classifiers.svm import KernelSpec
from dga.datagen import default_generator_config, generate_dataset, split_into_databases
from dga.features import Level1Label, Level2Label, fit_normalizer, to_arrays
from diagnosis.metrics import metrics_from_predictions
from diagnosis.pipeline import (
    FAULTY,
    NORMAL,
    BatchSettings,
    Diagnosis,
    compare_batch_classifiers,
    diagnose,
    diagnose_batch,
    evaluate_pipeline,
    majority_baseline,
)


class LookupClassifier(Classifier):
    """Predicts a fixed label per sample index stored in column 0"""

    kind = 'lookup'

    def __init__(self, labels, classes):
        self.labels = np.asarray(labels)
        self._classes = tuple(classes)

    @property
    def classes(self):
        return self._classes

    @property
    def n_inputs(self):
        return 1

    def predict(self, X):
        return self.labels[np.atleast_2d(X)[:, 0].astype(int)]

    def to_dict(self):
        return {'labels': self.labels.tolist(), 'classes': list(self._classes)}

    @classmethod
    def from_dict(cls, data):
        return cls(data['labels'], data['classes'])


def test_label_encodings():
    assert (NORMAL, FAULTY) == (0, 1)


def test_metrics_hand_tally():
    actual = [0] * 12 + [1] * 8
    predicted = [0] * 10 + [1] * 2 + [1] * 6 + [0] * 2
    report = metrics_from_predictions(predicted, actual, positive_class=1)
    assert report.confusion == ((10, 2), (2, 6))
    assert report.count == 20
    assert report.accuracy == pytest.approx(0.8)
    assert report.sensitivity == pytest.approx(0.75)
    assert report.specificity == pytest.approx(10 / 12)
    assert report.recall_of(1) == pytest.approx(0.75)


def test_undefined_rates_are_none():
    report = metrics_from_predictions([0, 1, 0], [0, 0, 0], classes=(0, 1), positive_class=1)
    assert report.sensitivity is None
    assert report.specificity == pytest.approx(2 / 3)
    assert report.per_class_recall == (pytest.approx(2 / 3), None)
    assert report.to_dict()['sensitivity'] is None

    no_positive = metrics_from_predictions([0, 1], [0, 1])
    assert no_positive.sensitivity is None and no_positive.specificity is None


def test_metrics_reject_bad_input():
    with pytest.raises(ValueError, match='empty'):
        metrics_from_predictions([], [])
    with pytest.raises(ValueError):
        metrics_from_predictions([0, 1], [0])
    with pytest.raises(ValueError):
        metrics_from_predictions([0, 5], [0, 1], classes=(0, 1))


def test_timings_stay_out_of_the_structured_form():
    report = metrics_from_predictions([0], [0], train_seconds=1.25, classify_seconds=0.5)
    assert 'train_seconds' not in report.to_dict()
    assert report.to_dict(include_timings=True)['train_seconds'] == 1.25


def test_diagnosis_gating():
    Diagnosis(Level1Label.NORMAL, (0.9, 0.1))
    Diagnosis(Level1Label.FAULTY, (0.0, 1.0), Level2Label.THERMAL, (0.2, 0.7, 0.1))
    with pytest.raises(ValueError):
        Diagnosis(Level1Label.NORMAL, (1.0, 0.0), Level2Label.THERMAL, (0.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        Diagnosis(Level1Label.FAULTY, (0.0, 1.0))
    with pytest.raises(ValueError, match='sum to 1'):
        Diagnosis(Level1Label.NORMAL, (0.5, 0.4))


def test_diagnosis_to_dict():
    result = Diagnosis(Level1Label.FAULTY, (0.25, 0.75), Level2Label.UNKNOWN_SOURCE, (0.0, 0.0, 1.0))
    data = result.to_dict()
    assert data['level1'] == 'Faulty'
    assert data['level1_confidence'] == {'Normal': 0.25, 'Faulty': 0.75}
    assert data['level2'] == 'UnknownSource'
    assert data['level2_confidence']['UnknownSource'] == 1.0
    assert Diagnosis(Level1Label.NORMAL, (1.0, 0.0)).to_dict()['level2'] is None


def test_level2_runs_only_on_faulty_rows():
    level1 = LookupClassifier([0, 1, 1, 0], (0, 1))
    level2 = LookupClassifier([2, 0, 1, 2], (0, 1, 2))
    X = np.arange(4, dtype=float).reshape(-1, 1)
    results = diagnose_batch(level1, level2, X)
    assert [r.level1 for r in results] == [Level1Label.NORMAL, Level1Label.FAULTY,
                                           Level1Label.FAULTY, Level1Label.NORMAL]
    assert [r.level2 for r in results] == [None, Level2Label.PARTIAL_DISCHARGE, Level2Label.THERMAL, None]
    assert results[1].level1_confidence == (0.0, 1.0)
    assert results[2].level2_confidence == (0.0, 1.0, 0.0)


def test_level2_uses_its_own_inputs():
    level1 = LookupClassifier([1, 1], (0, 1))
    level2 = LookupClassifier([0, 0, 2, 1], (0, 1, 2))
    X = np.array([[0.0], [1.0]])
    results = diagnose_batch(level1, level2, X, X_level2=X + 2)
    assert [r.level2 for r in results] == [Level2Label.UNKNOWN_SOURCE, Level2Label.THERMAL]
    with pytest.raises(ValueError):
        diagnose_batch(level1, level2, X, X_level2=np.zeros((3, 1)))


def test_diagnose_single_vector():
    level1 = LookupClassifier([1], (0, 1))
    level2 = LookupClassifier([1], (0, 1, 2))
    result = diagnose(level1, level2, np.array([0.0]))
    assert result.level2 == Level2Label.THERMAL
    with pytest.raises(ValueError):
        diagnose(level1, level2, np.zeros((2, 1)))
    with pytest.raises(ValueError):
        diagnose(level1, level2, np.zeros(3))


def test_evaluate_pipeline():
    X = np.arange(6, dtype=float).reshape(-1, 1)
    y1 = np.array([0, 0, 1, 1, 1, 1])
    y2 = np.array([-1, -1, 0, 1, 2, 2])
    level1 = LookupClassifier([0, 1, 1, 1, 0, 1], (0, 1))
    level2 = LookupClassifier([0, 0, 0, 2, 2, 2], (0, 1, 2))
    report = evaluate_pipeline(level1, level2, X, y1, y2)
    assert report.level1.accuracy == pytest.approx(4 / 6)
    assert report.level2.accuracy == pytest.approx(3 / 4)
    assert report.level2_accuracy_unconditional == pytest.approx(0.5)
    assert report.level2_accuracy_given_level1 == pytest.approx(2 / 3)
    assert report.overall_accuracy == pytest.approx(0.5)


def test_evaluate_pipeline_without_faulty_samples():
    X = np.arange(2, dtype=float).reshape(-1, 1)
    report = evaluate_pipeline(LookupClassifier([0, 0], (0, 1)), LookupClassifier([0, 0], (0, 1, 2)),
                               X, np.array([0, 0]), np.array([-1, -1]))
    assert report.level2 is None
    assert report.level2_accuracy_given_level1 is None
    assert report.overall_accuracy == 1.0
    assert report.level1.sensitivity is None


def test_majority_baseline():
    report = majority_baseline(np.array([0, 0, 1]), np.array([0, 1, 1, 2]))
    assert report.classes == (0, 1, 2)
    assert report.accuracy == pytest.approx(0.25)


def arrays(n, seed):
    dataset = generate_dataset(default_generator_config(n, seed=seed))
    (train, test), _ = split_into_databases(dataset, [n // 2, n // 2], seed=seed)
    params = fit_normalizer([s.record for s in train])
    return to_arrays(train, params), to_arrays(test, params)


def test_batch_comparison_uses_identical_data():
    train, test = arrays(240, seed=0)
    settings = BatchSettings(
        mlp_hidden_candidates=(3,),
        rbf_center_candidates=(4,),
        svm_kernels=(KernelSpec('gaussian', width=0.5),),
        svm_Cs=(1.0,),
        folds=2,
        max_iterations=60,
        svm_max_passes=5,
    )
    report = compare_batch_classifiers(train, test, settings)
    assert [(r.level, r.classifier) for r in report.rows] == [
        (1, 'MLP'), (1, 'RBF'), (1, 'SVM'), (2, 'MLP'), (2, 'RBF'), (2, 'SVM'),
    ]
    assert set(report.models) == {(r.level, r.classifier) for r in report.rows}

    n_test = len(test[1])
    n_faulty = int(np.sum(test[1] == FAULTY))
    for row in report.rows:
        assert row.metrics.count == (n_test if row.level == 1 else n_faulty)
        assert 0.0 <= row.metrics.accuracy <= 1.0
    assert report.row('MLP', 1).selected == 'hidden=3'
    assert report.row('SVM', 1).metrics.classes == (0, 1)
    assert report.row('SVM', 2).metrics.sensitivity is None
    assert report.row('MLP', 1).metrics.accuracy >= 0.7
    assert 'level1/MLP' in report.timings()
    with pytest.raises(KeyError):
        report.row('MLP', 3)


def test_batch_comparison_rejects_unknown_classifier():
    train, test = arrays(60, seed=1)
    with pytest.raises(ValueError, match='KNN'):
        compare_batch_classifiers(train, test, classifiers=('KNN',))


def test_confidence_columns_cover_all_classes():
    level1 = LookupClassifier([1], (0, 1))
    level2 = LookupClassifier([2], (1, 2))
    result = diagnose_batch(level1, level2, np.zeros((1, 1)))[0]
    assert_allclose(result.level2_confidence, (0.0, 0.0, 1.0))
