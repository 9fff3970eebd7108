"""
Classifier and weak-learner abstractions
Gives MLP, RBF and SVM models one interface for ensembles, diagnosis and snapshots
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Sequence, Tuple

import numpy as np


class Classifier(ABC):
    """Abstract base class for trained classifiers"""

    kind: str = ''

    @property
    @abstractmethod
    def classes(self) -> Tuple[int, ...]:
        """Sorted integer class labels the model can output"""

    @property
    @abstractmethod
    def n_inputs(self) -> int:
        """Input dimension"""

    @abstractmethod
    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict one class label per row of X"""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Snapshot payload"""

    @classmethod
    @abstractmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Classifier':
        """Restore from a snapshot payload"""

    def check_inputs(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"{self.kind} model expects {self.n_inputs} inputs, got {X.shape[1]}")
        return X

    def get_model_info(self) -> Dict[str, Any]:
        """Short description used by inspect-model"""
        return {
            'kind': self.kind,
            'inputs': self.n_inputs,
            'classes': list(self.classes),
        }


class WeakLearner(ABC):
    """Trains a classifier from labeled data; used by Learn++ and model selection"""

    kind: str = ''

    @abstractmethod
    def train(self, X: np.ndarray, y: np.ndarray, seed: int) -> Classifier:
        """Train a fresh classifier on (X, y)"""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Learner settings for snapshots"""


def class_targets(y: np.ndarray, classes: Sequence[int]) -> np.ndarray:
    """
    Target matrix for cross-entropy training

    Two classes give a single 0/1 column (the second class is positive);
    more classes give one-hot rows.
    """
    y = np.asarray(y)
    classes = np.asarray(classes)
    unknown = np.setdiff1d(y, classes)
    if unknown.size:
        raise ValueError(f"Labels {unknown.tolist()} are not in classes {classes.tolist()}")
    positions = np.searchsorted(classes, y)
    if len(classes) == 1:
        return np.ones((len(y), 1))
    if len(classes) == 2:
        return (positions == 1).astype(float).reshape(-1, 1)
    targets = np.zeros((len(y), len(classes)))
    targets[np.arange(len(y)), positions] = 1.0
    return targets


def outputs_to_labels(outputs: np.ndarray, classes: Sequence[int]) -> np.ndarray:
    """Map network outputs (sigmoid column or softmax rows) to class labels"""
    classes = np.asarray(classes)
    if len(classes) == 1:
        return np.full(outputs.shape[0], classes[0])
    if outputs.shape[1] == 1:
        return np.where(outputs[:, 0] >= 0.5, classes[1], classes[0])
    return classes[np.argmax(outputs, axis=1)]


def accuracy(predicted: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(y))) if len(y) else 0.0


def kfold_indices(n: int, folds: int, seed: int):
    """Seeded k-fold split yielding (train_idx, validation_idx) pairs"""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"Cannot make {folds} folds from {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    for chunk in np.array_split(order, folds):
        mask = np.ones(n, dtype=bool)
        mask[chunk] = False
        yield order[mask[order]], chunk
