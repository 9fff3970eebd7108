"""
Two-level diagnosis pipeline
Level 1 decides Normal/Faulty; level 2 runs on Faulty only and names the fault type
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from classifiers.base import Classifier, class_targets
from classifiers.mlp import MlpConfig, TrainingSet, search_hidden_units, train_scg
from classifiers.rbf import WIDTH_RULES, RbfConfig, select_rbf_config, train_rbf
from classifiers.svm import KernelSpec, SvmClassifier, cross_validate
from diagnosis.metrics import MetricsReport, evaluate, metrics_from_predictions
from dga.features import (
    LEVEL1_CLASSES,
    LEVEL2_CLASSES,
    Level1Label,
    Level2Label,
)
from ensemble.learnpp import EnsembleState

logger = logging.getLogger(__name__)

NORMAL = LEVEL1_CLASSES.index(Level1Label.NORMAL)
FAULTY = LEVEL1_CLASSES.index(Level1Label.FAULTY)

BATCH_CLASSIFIERS = ('MLP', 'RBF', 'SVM')


@dataclass(frozen=True)
class Diagnosis:
    """Outcome for one sample; confidences follow the label encodings"""
    level1: Level1Label
    level1_confidence: Tuple[float, ...]
    level2: Optional[Level2Label] = None
    level2_confidence: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.level1 == Level1Label.NORMAL and (self.level2 is not None or self.level2_confidence is not None):
            raise ValueError("A Normal diagnosis cannot carry a level-2 result")
        if self.level1 == Level1Label.FAULTY and (self.level2 is None or self.level2_confidence is None):
            raise ValueError("A Faulty diagnosis needs a level-2 result")
        for gamma in (self.level1_confidence, self.level2_confidence):
            if gamma is not None and abs(sum(gamma) - 1.0) > 1.0e-9:
                raise ValueError(f"Confidences must sum to 1, got {sum(gamma)!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'level1': self.level1.value,
            'level1_confidence': {label.value: g for label, g in zip(LEVEL1_CLASSES, self.level1_confidence)},
            'level2': self.level2.value if self.level2 else None,
            'level2_confidence': (
                {label.value: g for label, g in zip(LEVEL2_CLASSES, self.level2_confidence)}
                if self.level2_confidence is not None else None
            ),
        }


def _confidences(model: Classifier, X: np.ndarray, n_classes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predictions and confidence rows over the full label encoding

    Ensembles give normalized votes; single models put 1.0 on the predicted class.
    """
    predicted = np.asarray(model.predict(X), dtype=int)
    gamma = np.zeros((len(predicted), n_classes))
    if isinstance(model, EnsembleState):
        gamma[:, list(model.classes)] = model.predict_confidence(X)
    else:
        gamma[np.arange(len(predicted)), predicted] = 1.0
    return predicted, gamma


def diagnose_batch(level1_model: Classifier, level2_model: Classifier,
                   X: np.ndarray, X_level2: Optional[np.ndarray] = None) -> List[Diagnosis]:
    """
    Diagnose every row of X, running level 2 only on rows judged Faulty

    X_level2 holds the same samples normalized with the level-2 model's
    bounds; it defaults to X.
    """
    X = level1_model.check_inputs(X)
    X2 = level2_model.check_inputs(X if X_level2 is None else X_level2)
    if X2.shape[0] != X.shape[0]:
        raise ValueError(f"Level-2 inputs have {X2.shape[0]} rows, level-1 inputs {X.shape[0]}")
    pred1, gamma1 = _confidences(level1_model, X, len(LEVEL1_CLASSES))

    faulty = np.flatnonzero(pred1 == FAULTY)
    level2: Dict[int, Tuple[int, np.ndarray]] = {}
    if faulty.size:
        pred2, gamma2 = _confidences(level2_model, X2[faulty], len(LEVEL2_CLASSES))
        level2 = {int(i): (int(p), g) for i, p, g in zip(faulty, pred2, gamma2)}

    results = []
    for i in range(X.shape[0]):
        if i in level2:
            label2, g2 = level2[i]
            results.append(Diagnosis(
                level1=Level1Label.FAULTY,
                level1_confidence=tuple(gamma1[i].tolist()),
                level2=LEVEL2_CLASSES[label2],
                level2_confidence=tuple(g2.tolist()),
            ))
        else:
            results.append(Diagnosis(
                level1=LEVEL1_CLASSES[int(pred1[i])],
                level1_confidence=tuple(gamma1[i].tolist()),
            ))
    return results


def diagnose(level1_model: Classifier, level2_model: Classifier, x: np.ndarray,
             x_level2: Optional[np.ndarray] = None) -> Diagnosis:
    """
    Diagnose one normalized feature vector

    Args:
        level1_model: Normal/Faulty classifier (label 0 = Normal, 1 = Faulty)
        level2_model: Fault-type classifier (0 = PD, 1 = Thermal, 2 = UnknownSource)
        x: Normalized feature vector
        x_level2: The sample under the level-2 normalization, when it differs

    Returns:
        Diagnosis, with level 2 only when level 1 says Faulty
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"Expected one feature vector, got shape {x.shape}")
    x2 = None if x_level2 is None else np.asarray(x_level2, dtype=float).reshape(1, -1)
    return diagnose_batch(level1_model, level2_model, x.reshape(1, -1), x2)[0]


@dataclass(frozen=True)
class PipelineReport:
    """Both levels evaluated together"""
    level1: MetricsReport
    level2: Optional[MetricsReport]
    level2_accuracy_given_level1: Optional[float]
    level2_accuracy_unconditional: Optional[float]
    overall_accuracy: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'level1': self.level1.to_dict(),
            'level2': self.level2.to_dict() if self.level2 else None,
            'level2_accuracy_given_level1': self.level2_accuracy_given_level1,
            'level2_accuracy_unconditional': self.level2_accuracy_unconditional,
            'overall_accuracy': self.overall_accuracy,
        }


def evaluate_pipeline(level1_model: Classifier, level2_model: Classifier, X: np.ndarray,
                      y1: np.ndarray, y2: np.ndarray) -> PipelineReport:
    """
    End-to-end evaluation of the two-level pipeline

    The level-2 report covers the truly faulty samples with the level-2 model
    alone. The conditional accuracy only counts faulty samples that level 1
    also called Faulty; the unconditional one counts a level-1 miss as wrong.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y1 = np.asarray(y1, dtype=int)
    y2 = np.asarray(y2, dtype=int)

    level1 = evaluate(level1_model, X, y1, positive_class=FAULTY, classes=range(len(LEVEL1_CLASSES)))
    pred1 = level1_model.predict(X)

    faulty = y1 == FAULTY
    level2 = None
    given = unconditional = None
    pred2 = np.full(len(y1), -1)
    if np.any(faulty):
        level2 = evaluate(level2_model, X[faulty], y2[faulty], classes=range(len(LEVEL2_CLASSES)))
        pred2[faulty] = level2_model.predict(X[faulty])
        hit1 = pred1[faulty] == FAULTY
        hit2 = pred2[faulty] == y2[faulty]
        unconditional = float(np.mean(hit1 & hit2))
        given = float(np.mean(hit2[hit1])) if np.any(hit1) else None

    correct = np.where(faulty, (pred1 == FAULTY) & (pred2 == y2), pred1 == NORMAL)
    return PipelineReport(
        level1=level1,
        level2=level2,
        level2_accuracy_given_level1=given,
        level2_accuracy_unconditional=unconditional,
        overall_accuracy=float(np.mean(correct)),
    )


@dataclass(frozen=True)
class BatchSettings:
    """Model-selection grids for the batch comparison"""
    mlp_hidden_candidates: Tuple[int, ...] = (5, 10, 15)
    rbf_center_candidates: Tuple[int, ...] = (10, 20, 40, 80)
    rbf_width_rules: Tuple[str, ...] = WIDTH_RULES
    svm_kernels: Tuple[KernelSpec, ...] = (KernelSpec('linear'), KernelSpec('gaussian', width=0.5))
    svm_Cs: Tuple[float, ...] = (1.0, 10.0)
    folds: int = 3
    seed: int = 0
    alpha: float = 0.01
    max_iterations: int = 200
    svm_max_passes: int = 50


@dataclass(frozen=True)
class ComparisonRow:
    classifier: str
    level: int
    selected: str
    metrics: MetricsReport


@dataclass
class ComparisonReport:
    """Table of classifiers per diagnosis level"""
    rows: List[ComparisonRow] = field(default_factory=list)
    # Trained models keyed by (level, classifier); not part of the report
    models: Dict[Tuple[int, str], Classifier] = field(default_factory=dict)

    def row(self, classifier: str, level: int) -> ComparisonRow:
        for r in self.rows:
            if r.classifier == classifier and r.level == level:
                return r
        raise KeyError(f"No row for {classifier} at level {level}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rows': [
                {'classifier': r.classifier, 'level': r.level, 'selected': r.selected, **r.metrics.to_dict()}
                for r in self.rows
            ],
        }

    def timings(self) -> Dict[str, Any]:
        return {f"level{r.level}/{r.classifier}": r.metrics.timings() for r in self.rows}


def _fit_mlp(X: np.ndarray, y: np.ndarray, settings: BatchSettings) -> Tuple[Classifier, str, float]:
    classes = tuple(int(c) for c in np.unique(y))
    data = TrainingSet(X, class_targets(y, classes))
    template = MlpConfig(
        n_inputs=X.shape[1],
        n_hidden=settings.mlp_hidden_candidates[0],
        n_outputs=data.targets.shape[1],
        alpha=settings.alpha,
        max_iterations=settings.max_iterations,
        seed=settings.seed,
    )
    n_hidden = search_hidden_units(template, data, settings.mlp_hidden_candidates, settings.folds, settings.seed)
    start = time.perf_counter()
    model = train_scg(replace(template, n_hidden=n_hidden), data, classes=classes)
    return model, f"hidden={n_hidden}", time.perf_counter() - start


def _fit_rbf(X: np.ndarray, y: np.ndarray, settings: BatchSettings) -> Tuple[Classifier, str, float]:
    classes = tuple(int(c) for c in np.unique(y))
    data = TrainingSet(X, class_targets(y, classes))
    template = RbfConfig(
        n_centers=settings.rbf_center_candidates[0],
        n_outputs=data.targets.shape[1],
        seed=settings.seed,
        alpha=settings.alpha,
        max_iterations=settings.max_iterations,
    )
    cfg = select_rbf_config(template, data, settings.rbf_center_candidates, settings.rbf_width_rules,
                            settings.folds, settings.seed)
    start = time.perf_counter()
    model = train_rbf(cfg, data, classes=classes)
    return model, f"centers={cfg.n_centers} widths={cfg.width_rule}", time.perf_counter() - start


def _fit_svm(X: np.ndarray, y: np.ndarray, settings: BatchSettings) -> Tuple[Classifier, str, float]:
    cfg = cross_validate(X, y, settings.svm_kernels, settings.svm_Cs, settings.folds, settings.seed,
                         max_passes=settings.svm_max_passes)
    start = time.perf_counter()
    model = SvmClassifier.fit(X, y, cfg)
    return model, f"{cfg.kernel.describe()} C={cfg.C:g}", time.perf_counter() - start


_FITTERS = {'MLP': _fit_mlp, 'RBF': _fit_rbf, 'SVM': _fit_svm}


def compare_batch_classifiers(train: Tuple[np.ndarray, np.ndarray, np.ndarray],
                              test: Tuple[np.ndarray, np.ndarray, np.ndarray],
                              settings: BatchSettings = BatchSettings(),
                              classifiers: Sequence[str] = BATCH_CLASSIFIERS) -> ComparisonReport:
    """
    Train MLP, RBF and SVM on identical data and evaluate them on identical data

    Level 2 is trained and tested on the faulty samples only.

    Args:
        train: (X, level-1 labels, level-2 labels) for training
        test: The same triple for evaluation
        settings: Model-selection grids and seed
        classifiers: Subset of 'MLP', 'RBF', 'SVM'

    Returns:
        ComparisonReport with one row per classifier and level
    """
    X_train, y1_train, y2_train = train
    X_test, y1_test, y2_test = test
    if len(y1_train) == 0 or len(y1_test) == 0:
        raise ValueError("Batch comparison needs nonempty training and test sets")

    levels = [
        (1, X_train, y1_train, X_test, y1_test, FAULTY, range(len(LEVEL1_CLASSES))),
    ]
    faulty_train = y1_train == FAULTY
    faulty_test = y1_test == FAULTY
    if np.any(faulty_train) and np.any(faulty_test):
        levels.append((2, X_train[faulty_train], y2_train[faulty_train],
                       X_test[faulty_test], y2_test[faulty_test], None, range(len(LEVEL2_CLASSES))))
    else:
        logger.warning("No faulty samples on one side; skipping level 2")

    report = ComparisonReport()
    for level, Xtr, ytr, Xte, yte, positive, classes in levels:
        for name in classifiers:
            if name not in _FITTERS:
                raise ValueError(f"Unknown classifier {name!r}, expected one of {BATCH_CLASSIFIERS}")
            logger.info("Level %d: training %s on %d samples", level, name, len(ytr))
            model, selected, train_seconds = _FITTERS[name](Xtr, ytr, settings)
            metrics = evaluate(model, Xte, yte, positive_class=positive, classes=classes,
                               train_seconds=train_seconds)
            report.rows.append(ComparisonRow(name, level, selected, metrics))
            report.models[(level, name)] = model
    return report


def majority_baseline(y_train: np.ndarray, y_test: np.ndarray) -> MetricsReport:
    """Accuracy of always predicting the most frequent training label"""
    labels, counts = np.unique(y_train, return_counts=True)
    majority = int(labels[np.argmax(counts)])
    classes = sorted(set(np.unique(y_test).tolist()) | {majority})
    return metrics_from_predictions(np.full(len(y_test), majority), y_test, classes=classes)
