"""
Classification metrics
Accuracy, sensitivity, specificity and confusion counts, with undefined rates kept as None
"""

import time
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from classifiers.base import Classifier


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation of one classifier on one labeled set"""
    classes: Tuple[int, ...]
    confusion: Tuple[Tuple[int, ...], ...]
    accuracy: float
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    positive_class: Optional[int] = None
    per_class_recall: Tuple[Optional[float], ...] = ()
    train_seconds: float = 0.0
    classify_seconds: float = 0.0

    @property
    def count(self) -> int:
        return int(sum(sum(row) for row in self.confusion))

    def recall_of(self, label: int) -> Optional[float]:
        return self.per_class_recall[self.classes.index(label)]

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        """Structured form; timings only on request so reports stay deterministic"""
        data = {
            'classes': list(self.classes),
            'confusion': [list(row) for row in self.confusion],
            'count': self.count,
            'accuracy': self.accuracy,
            'sensitivity': self.sensitivity,
            'specificity': self.specificity,
            'positive_class': self.positive_class,
            'per_class_recall': list(self.per_class_recall),
        }
        if include_timings:
            data.update(self.timings())
        return data

    def timings(self) -> Dict[str, float]:
        return {
            'train_seconds': round(self.train_seconds, 3),
            'classify_seconds': round(self.classify_seconds, 3),
        }


def _rate(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def metrics_from_predictions(predicted: Sequence[int], actual: Sequence[int],
                             classes: Optional[Sequence[int]] = None,
                             positive_class: Optional[int] = None,
                             train_seconds: float = 0.0,
                             classify_seconds: float = 0.0) -> MetricsReport:
    """
    Tally predictions against labels

    Args:
        predicted: Predicted labels
        actual: True labels
        classes: Confusion-matrix label order (defaults to every label seen, sorted)
        positive_class: Label counted as positive for sensitivity/specificity;
            None leaves both undefined

    Returns:
        MetricsReport whose confusion rows are actual classes, columns predicted
    """
    predicted = np.asarray(predicted, dtype=int)
    actual = np.asarray(actual, dtype=int)
    if len(actual) == 0:
        raise ValueError("Cannot evaluate on empty data")
    if len(predicted) != len(actual):
        raise ValueError(f"{len(predicted)} predictions for {len(actual)} labels")

    seen = set(np.unique(actual).tolist()) | set(np.unique(predicted).tolist())
    if classes is None:
        classes = sorted(seen)
    classes = tuple(int(c) for c in classes)
    unknown = seen - set(classes)
    if unknown:
        raise ValueError(f"Labels {sorted(unknown)} are not in classes {list(classes)}")

    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    np.add.at(confusion, ([index[a] for a in actual], [index[p] for p in predicted]), 1)

    accuracy = float(np.trace(confusion)) / len(actual)
    recall = tuple(_rate(int(confusion[i, i]), int(confusion[i].sum())) for i in range(len(classes)))

    sensitivity = specificity = None
    if positive_class is not None:
        is_pos = actual == positive_class
        said_pos = predicted == positive_class
        sensitivity = _rate(int(np.sum(is_pos & said_pos)), int(np.sum(is_pos)))
        specificity = _rate(int(np.sum(~is_pos & ~said_pos)), int(np.sum(~is_pos)))

    return MetricsReport(
        classes=classes,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        accuracy=accuracy,
        sensitivity=sensitivity,
        specificity=specificity,
        positive_class=positive_class,
        per_class_recall=recall,
        train_seconds=train_seconds,
        classify_seconds=classify_seconds,
    )


def evaluate(model: Classifier, X: np.ndarray, y: np.ndarray,
             positive_class: Optional[int] = None,
             classes: Optional[Sequence[int]] = None,
             train_seconds: float = 0.0) -> MetricsReport:
    """Classify X with the model, timing the call, and tally the result"""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("Cannot evaluate on empty data")
    start = time.perf_counter()
    predicted = model.predict(X)
    classify_seconds = time.perf_counter() - start
    return metrics_from_predictions(predicted, y, classes=classes, positive_class=positive_class,
                                    train_seconds=train_seconds, classify_seconds=classify_seconds)
