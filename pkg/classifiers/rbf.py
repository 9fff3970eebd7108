"""
Radial-basis-function network
Spherical Gaussian centres fitted by EM, output layer trained by SCG on fixed activations
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from classifiers.base import (
    Classifier,
    WeakLearner,
    accuracy,
    class_targets,
    kfold_indices,
    outputs_to_labels,
)
from classifiers.mlp import TrainingSet, output_activation, train_single_layer

logger = logging.getLogger(__name__)

WIDTH_RULES = ('em', 'max_distance')

# Widths are floored at this fraction of the data diameter
WIDTH_FLOOR_FRACTION = 1.0e-3


@dataclass(frozen=True)
class RbfConfig:
    """Basis count and both training stages' settings"""
    n_centers: int
    n_outputs: int = 1
    em_max_iterations: int = 100
    em_tolerance: float = 1.0e-6
    seed: int = 0
    width_rule: str = 'em'
    alpha: float = 0.0
    max_iterations: int = 200
    tolerance: float = 1.0e-6

    def __post_init__(self):
        errors = []
        if self.n_centers < 1:
            errors.append(f"n_centers must be >= 1, got {self.n_centers}")
        if self.n_outputs < 1:
            errors.append(f"n_outputs must be >= 1, got {self.n_outputs}")
        if self.em_max_iterations < 1:
            errors.append(f"em_max_iterations must be >= 1, got {self.em_max_iterations}")
        if self.em_tolerance <= 0:
            errors.append(f"em_tolerance must be > 0, got {self.em_tolerance}")
        if self.width_rule not in WIDTH_RULES:
            errors.append(f"width_rule must be one of {WIDTH_RULES}, got {self.width_rule!r}")
        if self.alpha < 0:
            errors.append(f"alpha must be >= 0, got {self.alpha}")
        if errors:
            raise ValueError("Invalid RBF config: " + "; ".join(errors))


class CenterFit(NamedTuple):
    centers: np.ndarray
    widths: np.ndarray
    log_likelihood: List[float]
    mixing_weights: np.ndarray


@dataclass
class RbfModel(Classifier):
    """Fixed Gaussian bases plus a sigmoid/softmax output layer (bias last row)"""
    config: RbfConfig
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    class_labels: Tuple[int, ...] = (0, 1)

    kind = 'rbf'

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.widths = np.asarray(self.widths, dtype=float).ravel()
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.centers.shape[0]
        if self.widths.shape != (n,):
            raise ValueError(f"{n} centers but {self.widths.size} widths")
        if np.any(self.widths <= 0):
            raise ValueError("RBF widths must be > 0")
        if self.weights.shape[0] != n + 1:
            raise ValueError(f"Output weights need {n + 1} rows, got {self.weights.shape[0]}")
        if not all(np.all(np.isfinite(a)) for a in (self.centers, self.widths, self.weights)):
            raise ValueError("RBF parameters must be finite")
        self.class_labels = tuple(int(c) for c in self.class_labels)

    @property
    def classes(self) -> Tuple[int, ...]:
        return self.class_labels

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return forward(self, np.atleast_2d(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return outputs_to_labels(self.predict_proba(X), self.class_labels)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': asdict(self.config),
            'centers': self.centers.tolist(),
            'widths': self.widths.tolist(),
            'weights': self.weights.tolist(),
            'classes': list(self.class_labels),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RbfModel':
        return cls(
            config=RbfConfig(**data['config']),
            centers=np.array(data['centers'], dtype=float),
            widths=np.array(data['widths'], dtype=float),
            weights=np.array(data['weights'], dtype=float),
            class_labels=tuple(data['classes']),
        )

    def get_model_info(self) -> Dict[str, Any]:
        info = super().get_model_info()
        info.update(centers=int(self.centers.shape[0]), width_rule=self.config.width_rule)
        return info


def basis(x: np.ndarray, center: np.ndarray, width: float) -> float:
    """Gaussian basis exp(-|x - center|^2 / (2 width^2))"""
    if width <= 0:
        raise ValueError(f"Basis width must be > 0, got {width}")
    diff = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    return float(np.exp(-(diff @ diff) / (2.0 * width ** 2)))


def design_matrix(X: np.ndarray, centers: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Basis activations, one row per input and one column per centre"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sq = cdist(X, np.atleast_2d(centers), 'sqeuclidean')
    return np.exp(-sq / (2.0 * np.asarray(widths, dtype=float) ** 2))


def forward(model: RbfModel, x: np.ndarray) -> np.ndarray:
    """Output probabilities for one input vector or a matrix of rows"""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"RBF expects {model.n_inputs} inputs, got {X.shape[1]}")
    phi = design_matrix(X, model.centers, model.widths)
    y = output_activation(phi @ model.weights[:-1] + model.weights[-1])
    return y[0] if single else y


def data_diameter(X: np.ndarray, chunk: int = 1024) -> float:
    """Largest pairwise distance, computed blockwise"""
    X = np.atleast_2d(X)
    diameter = 0.0
    for start in range(0, X.shape[0], chunk):
        block = cdist(X[start:start + chunk], X)
        diameter = max(diameter, float(block.max()))
    return diameter


def _log_densities(X: np.ndarray, means: np.ndarray, variances: np.ndarray,
                   mixing: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    sq = cdist(X, means, 'sqeuclidean')
    with np.errstate(divide='ignore'):
        log_mix = np.log(mixing)
    return log_mix - 0.5 * d * np.log(2.0 * np.pi * variances) - sq / (2.0 * variances)


def fit_centers_em(inputs: np.ndarray, config: RbfConfig) -> CenterFit:
    """
    Fit a spherical Gaussian mixture by EM

    Components start at a seeded random subset of the inputs with the
    pooled per-dimension variance. Each component keeps one scalar variance.

    Args:
        inputs: Training inputs, one row per sample
        config: n_centers, EM cap and tolerance, seed and width rule

    Returns:
        CenterFit with centres, widths and the log-likelihood history
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    m, d = X.shape
    if m == 0 or X.size == 0:
        raise ValueError("Cannot fit RBF centers on empty data")
    n = config.n_centers
    if n > m:
        raise ValueError(f"{n} centers requested but only {m} samples")

    rng = np.random.default_rng(config.seed)
    floor = WIDTH_FLOOR_FRACTION * data_diameter(X)
    var_floor = max(floor ** 2, np.finfo(float).tiny)

    means = X[rng.choice(m, size=n, replace=False)].copy()
    pooled = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1))) / d
    variances = np.full(n, max(pooled, var_floor))
    mixing = np.full(n, 1.0 / n)

    history: List[float] = []
    for iteration in range(config.em_max_iterations):
        # E-step
        log_p = _log_densities(X, means, variances, mixing)
        log_norm = logsumexp(log_p, axis=1)
        ll = float(np.sum(log_norm))
        if history and ll - history[-1] < config.em_tolerance:
            history.append(ll)
            break
        history.append(ll)
        resp = np.exp(log_p - log_norm[:, None])

        # M-step
        counts = resp.sum(axis=0)
        alive = counts > 1.0e-10
        means[alive] = (resp.T @ X)[alive] / counts[alive, None]
        sq = cdist(X, means, 'sqeuclidean')
        spread = np.sum(resp * sq, axis=0)
        variances[alive] = np.maximum(spread[alive] / (d * counts[alive]), var_floor)
        mixing = counts / m

    logger.debug("EM with %d centers stopped after %d iterations, log-likelihood %.6g",
                 n, len(history), history[-1])

    if config.width_rule == 'max_distance':
        d_max = data_diameter(means)
        if d_max > 0.0:
            widths = np.full(n, max(d_max / np.sqrt(2.0 * n), np.sqrt(var_floor)))
        else:
            # A single centre has no spread to measure
            widths = np.sqrt(variances)
    else:
        widths = np.sqrt(variances)
    return CenterFit(means, widths, history, mixing)


def train_output_layer(centers: np.ndarray, widths: np.ndarray, data: TrainingSet,
                       alpha: float = 0.0, max_iterations: int = 200,
                       tolerance: float = 1.0e-6) -> np.ndarray:
    """
    Train the output weights with the bases held fixed

    Returns:
        Weights of shape (n_centers + 1, K), bias last
    """
    phi = design_matrix(data.inputs, centers, widths)
    return train_single_layer(phi, data.targets, alpha=alpha,
                              max_iterations=max_iterations, tolerance=tolerance)


def train_rbf(config: RbfConfig, data: TrainingSet,
              classes: Optional[Sequence[int]] = None) -> RbfModel:
    """Fit centres by EM, then the output layer by SCG"""
    if data.targets.shape[1] != config.n_outputs:
        raise ValueError(f"RBF has {config.n_outputs} outputs, targets have {data.targets.shape[1]} columns")
    fit = fit_centers_em(data.inputs, config)
    weights = train_output_layer(fit.centers, fit.widths, data, alpha=config.alpha,
                                 max_iterations=config.max_iterations, tolerance=config.tolerance)
    if classes is None:
        classes = (0, 1) if config.n_outputs == 1 else tuple(range(config.n_outputs))
    return RbfModel(config, fit.centers, fit.widths, weights, tuple(classes))


def _cross_validated_accuracy(cfg: RbfConfig, data: TrainingSet, splits) -> float:
    scores = []
    for train_idx, val_idx in splits:
        model = train_rbf(cfg, data.subset(train_idx))
        val = data.subset(val_idx)
        scores.append(accuracy(model.predict(val.inputs), val.labels()))
    return float(np.mean(scores))


def search_basis_count(template: RbfConfig, data: TrainingSet, candidates: Sequence[int],
                       folds: int = 5, seed: int = 0) -> int:
    """k-fold choice of the number of centres; ties go to fewer centres"""
    return select_rbf_config(template, data, candidates, (template.width_rule,), folds, seed).n_centers


def select_rbf_config(template: RbfConfig, data: TrainingSet, candidates: Sequence[int],
                      width_rules: Sequence[str] = WIDTH_RULES, folds: int = 5, seed: int = 0) -> RbfConfig:
    """
    k-fold choice of the number of centres and the width rule

    Ties go to fewer centres, then to the rule listed first. Candidates
    larger than the smallest training fold are skipped.

    Returns:
        The template with the winning n_centers and width_rule
    """
    if not candidates:
        raise ValueError("No basis-count candidates given")
    if not width_rules:
        raise ValueError("No width rules given")
    ordered = sorted(set(int(c) for c in candidates))
    rules = list(dict.fromkeys(width_rules))
    if len(ordered) == 1 and len(rules) == 1:
        return RbfConfig(**{**asdict(template), 'n_centers': ordered[0], 'width_rule': rules[0]})

    splits = list(kfold_indices(len(data), folds, seed))
    smallest_fold = min(len(train_idx) for train_idx, _ in splits)
    best, best_score = None, -1.0
    for n_centers in ordered:
        if n_centers > smallest_fold:
            logger.warning("Skipping %d centers: training folds hold only %d samples", n_centers, smallest_fold)
            continue
        for rule in rules:
            cfg = RbfConfig(**{**asdict(template), 'n_centers': n_centers, 'width_rule': rule})
            score = _cross_validated_accuracy(cfg, data, splits)
            logger.info("RBF centers %d, %s widths: mean validation accuracy %.4f", n_centers, rule, score)
            if score > best_score:
                best, best_score = cfg, score
    if best is None:
        best = RbfConfig(**{**asdict(template), 'n_centers': ordered[0], 'width_rule': rules[0]})
    return best


@dataclass(frozen=True)
class RbfLearner(WeakLearner):
    """Builds RBF classifiers from labeled data"""
    n_centers: int = 10
    alpha: float = 0.0
    em_max_iterations: int = 100
    max_iterations: int = 200
    width_rule: str = 'em'

    kind = 'rbf'

    def train(self, X: np.ndarray, y: np.ndarray, seed: int) -> RbfModel:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        classes = tuple(int(c) for c in np.unique(y))
        targets = class_targets(y, classes)
        cfg = RbfConfig(
            n_centers=min(self.n_centers, X.shape[0]),
            n_outputs=targets.shape[1],
            em_max_iterations=self.em_max_iterations,
            seed=seed,
            width_rule=self.width_rule,
            alpha=self.alpha,
            max_iterations=self.max_iterations,
        )
        return train_rbf(cfg, TrainingSet(X, targets), classes=classes)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, **asdict(self)}
