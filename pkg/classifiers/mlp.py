"""
Two-layer perceptron trained with scaled conjugate gradient
tanh hidden units, sigmoid or softmax outputs, cross-entropy with weight decay
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from classifiers.base import (
    Classifier,
    WeakLearner,
    accuracy,
    class_targets,
    kfold_indices,
    outputs_to_labels,
)
from classifiers.scg import scg_minimize

logger = logging.getLogger(__name__)

LOG_FLOOR = 1.0e-12


@dataclass(frozen=True)
class MlpConfig:
    """Network shape and training settings"""
    n_inputs: int
    n_hidden: int
    n_outputs: int = 1
    alpha: float = 0.01
    beta: float = 1.0
    max_iterations: int = 200
    tolerance: float = 1.0e-6
    seed: int = 0
    error_goal: Optional[float] = None
    # Stop once this fraction of the training set is classified correctly
    accuracy_goal: Optional[float] = None

    def __post_init__(self):
        errors = []
        if self.n_inputs < 1:
            errors.append(f"n_inputs must be >= 1, got {self.n_inputs}")
        if self.n_hidden < 1:
            errors.append(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.n_outputs < 1:
            errors.append(f"n_outputs must be >= 1, got {self.n_outputs}")
        if self.alpha < 0:
            errors.append(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            errors.append(f"beta must be > 0, got {self.beta}")
        if self.error_goal is not None and self.error_goal < 0:
            errors.append(f"error_goal must be >= 0, got {self.error_goal}")
        if self.accuracy_goal is not None and not 0.0 < self.accuracy_goal <= 1.0:
            errors.append(f"accuracy_goal must lie in (0, 1], got {self.accuracy_goal}")
        if errors:
            raise ValueError("Invalid MLP config: " + "; ".join(errors))

    @property
    def n_weights(self) -> int:
        return (self.n_inputs + 1) * self.n_hidden + (self.n_hidden + 1) * self.n_outputs


@dataclass(frozen=True)
class TrainingSet:
    """Inputs with 0/1 targets (one column for two classes, one-hot otherwise)"""
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets.reshape(-1, 1)
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
        if not np.all((targets == 0.0) | (targets == 1.0)):
            raise ValueError("Targets must be 0 or 1")
        if targets.shape[1] > 1 and not np.all(targets.sum(axis=1) == 1.0):
            raise ValueError("Multi-class targets must be one-hot")
        object.__setattr__(self, 'inputs', inputs)
        object.__setattr__(self, 'targets', targets)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def labels(self) -> np.ndarray:
        """Positional class index of every target row"""
        if self.targets.shape[1] == 1:
            return self.targets[:, 0].astype(int)
        return np.argmax(self.targets, axis=1)

    def subset(self, idx: np.ndarray) -> 'TrainingSet':
        return TrainingSet(self.inputs[idx], self.targets[idx])


@dataclass
class MlpModel(Classifier):
    """Trained weights; bias is the last row of each matrix"""
    config: MlpConfig
    w1: np.ndarray
    w2: np.ndarray
    class_labels: Tuple[int, ...] = (0, 1)

    kind = 'mlp'

    def __post_init__(self):
        cfg = self.config
        self.w1 = np.asarray(self.w1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        if self.w1.shape != (cfg.n_inputs + 1, cfg.n_hidden):
            raise ValueError(f"Layer-1 weights have shape {self.w1.shape}, expected {(cfg.n_inputs + 1, cfg.n_hidden)}")
        if self.w2.shape != (cfg.n_hidden + 1, cfg.n_outputs):
            raise ValueError(f"Layer-2 weights have shape {self.w2.shape}, expected {(cfg.n_hidden + 1, cfg.n_outputs)}")
        if not (np.all(np.isfinite(self.w1)) and np.all(np.isfinite(self.w2))):
            raise ValueError("MLP weights must be finite")
        self.class_labels = tuple(int(c) for c in self.class_labels)

    @property
    def classes(self) -> Tuple[int, ...]:
        return self.class_labels

    @property
    def n_inputs(self) -> int:
        return self.config.n_inputs

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.w2.ravel()])

    def with_weights(self, w: np.ndarray) -> 'MlpModel':
        w1, w2 = _unpack(w, self.config)
        return MlpModel(self.config, w1, w2, self.class_labels)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return forward(self, np.atleast_2d(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return outputs_to_labels(self.predict_proba(X), self.class_labels)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': asdict(self.config),
            'w1': self.w1.tolist(),
            'w2': self.w2.tolist(),
            'classes': list(self.class_labels),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MlpModel':
        return cls(
            config=MlpConfig(**data['config']),
            w1=np.array(data['w1'], dtype=float),
            w2=np.array(data['w2'], dtype=float),
            class_labels=tuple(data['classes']),
        )

    def get_model_info(self) -> Dict[str, Any]:
        info = super().get_model_info()
        info.update(hidden_units=self.config.n_hidden, outputs=self.config.n_outputs)
        return info


def _unpack(w: np.ndarray, cfg: MlpConfig) -> Tuple[np.ndarray, np.ndarray]:
    split = (cfg.n_inputs + 1) * cfg.n_hidden
    w1 = w[:split].reshape(cfg.n_inputs + 1, cfg.n_hidden)
    w2 = w[split:].reshape(cfg.n_hidden + 1, cfg.n_outputs)
    return w1, w2


def decay_mask(cfg: MlpConfig) -> np.ndarray:
    """1 for weights under weight decay, 0 for biases"""
    m1 = np.ones((cfg.n_inputs + 1, cfg.n_hidden))
    m1[-1] = 0.0
    m2 = np.ones((cfg.n_hidden + 1, cfg.n_outputs))
    m2[-1] = 0.0
    return np.concatenate([m1.ravel(), m2.ravel()])


def output_activation(a: np.ndarray) -> np.ndarray:
    """Logistic sigmoid for one output, softmax across several"""
    if a.shape[1] == 1:
        return expit(a)
    return softmax(a, axis=1)


def cross_entropy(a: np.ndarray, targets: np.ndarray) -> float:
    """Cross-entropy of output pre-activations against 0/1 targets, log floor applied"""
    if a.shape[1] == 1:
        y = expit(a)
        not_y = expit(-a)
        return float(-np.sum(targets * np.log(np.maximum(y, LOG_FLOOR))
                             + (1.0 - targets) * np.log(np.maximum(not_y, LOG_FLOOR))))
    y = softmax(a, axis=1)
    return float(-np.sum(targets * np.log(np.maximum(y, LOG_FLOOR))))


def _hidden(w1: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.tanh(X @ w1[:-1] + w1[-1])


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """
    Network outputs for one input vector or a matrix of rows

    Returns:
        K probabilities per input, shaped like the input (1-D in, 1-D out)
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.config.n_inputs:
        raise ValueError(f"MLP expects {model.config.n_inputs} inputs, got {X.shape[1]}")
    z = _hidden(model.w1, X)
    y = output_activation(z @ model.w2[:-1] + model.w2[-1])
    return y[0] if single else y


def _objective(w: np.ndarray, cfg: MlpConfig, data: TrainingSet, mask: np.ndarray) -> float:
    w1, w2 = _unpack(w, cfg)
    z = _hidden(w1, data.inputs)
    a = z @ w2[:-1] + w2[-1]
    return cfg.beta * cross_entropy(a, data.targets) + 0.5 * cfg.alpha * float(np.sum((w * mask) ** 2))


def _objective_gradient(w: np.ndarray, cfg: MlpConfig, data: TrainingSet, mask: np.ndarray) -> np.ndarray:
    w1, w2 = _unpack(w, cfg)
    X = data.inputs
    z = _hidden(w1, X)
    y = output_activation(z @ w2[:-1] + w2[-1])

    delta2 = cfg.beta * (y - data.targets)
    g2 = np.vstack([z.T @ delta2, delta2.sum(axis=0)])
    delta1 = (delta2 @ w2[:-1].T) * (1.0 - z ** 2)
    g1 = np.vstack([X.T @ delta1, delta1.sum(axis=0)])

    return np.concatenate([g1.ravel(), g2.ravel()]) + cfg.alpha * mask * w


def _check_data(cfg: MlpConfig, data: TrainingSet):
    if len(data) == 0:
        raise ValueError("Training set is empty")
    if data.inputs.shape[1] != cfg.n_inputs:
        raise ValueError(f"MLP expects {cfg.n_inputs} inputs, data has {data.inputs.shape[1]}")
    if data.targets.shape[1] != cfg.n_outputs:
        raise ValueError(f"MLP has {cfg.n_outputs} outputs, targets have {data.targets.shape[1]} columns")


def training_accuracy(w: np.ndarray, cfg: MlpConfig, data: TrainingSet) -> float:
    """Fraction of data the flat weights w classify correctly"""
    w1, w2 = _unpack(w, cfg)
    outputs = output_activation(_hidden(w1, data.inputs) @ w2[:-1] + w2[-1])
    positions = (0, 1) if cfg.n_outputs == 1 else tuple(range(cfg.n_outputs))
    return accuracy(outputs_to_labels(outputs, positions), data.labels())


def error(model: MlpModel, data: TrainingSet) -> float:
    """Regularised cross-entropy error of the model on data"""
    _check_data(model.config, data)
    return _objective(model.flat_weights(), model.config, data, decay_mask(model.config))


def gradient(model: MlpModel, data: TrainingSet) -> np.ndarray:
    """Flattened gradient of `error` (layer-1 then layer-2, row-major)"""
    _check_data(model.config, data)
    return _objective_gradient(model.flat_weights(), model.config, data, decay_mask(model.config))


def init_model(cfg: MlpConfig, classes: Optional[Sequence[int]] = None) -> MlpModel:
    """Seeded uniform initialisation in +-1/sqrt(fan-in)"""
    rng = np.random.default_rng(cfg.seed)
    r1 = 1.0 / np.sqrt(cfg.n_inputs)
    r2 = 1.0 / np.sqrt(cfg.n_hidden)
    w1 = rng.uniform(-r1, r1, size=(cfg.n_inputs + 1, cfg.n_hidden))
    w2 = rng.uniform(-r2, r2, size=(cfg.n_hidden + 1, cfg.n_outputs))
    if classes is None:
        classes = (0, 1) if cfg.n_outputs == 1 else tuple(range(cfg.n_outputs))
    return MlpModel(cfg, w1, w2, tuple(classes))


def train_scg(config: MlpConfig, data: TrainingSet,
              classes: Optional[Sequence[int]] = None) -> MlpModel:
    """
    Train an MLP with scaled conjugate gradient

    Args:
        config: Network shape and optimiser settings
        data: Training set matching the config dimensions
        classes: Labels of the output positions (defaults to 0..K-1)

    With `accuracy_goal` set, training ends as soon as that fraction of the
    training set is classified correctly, on the shortest part of the last
    step that gets there.

    Returns:
        Trained model whose error is no higher than the initial model's
    """
    _check_data(config, data)
    model = init_model(config, classes)
    mask = decay_mask(config)
    goal = None if config.error_goal is None else config.error_goal * len(data)

    def reached_goal(w: np.ndarray) -> bool:
        return training_accuracy(w, config, data) >= config.accuracy_goal

    result = scg_minimize(
        lambda w: _objective(w, config, data, mask),
        lambda w: _objective_gradient(w, config, data, mask),
        model.flat_weights(),
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
        error_goal=goal,
        stop=None if config.accuracy_goal is None else reached_goal,
    )
    logger.debug("MLP %d-%d-%d trained: error %.4f -> %.4f in %d iterations",
                 config.n_inputs, config.n_hidden, config.n_outputs,
                 result.initial_error, result.error, result.iterations)
    return model.with_weights(result.weights)


def search_hidden_units(template: MlpConfig, data: TrainingSet, candidates: Sequence[int],
                        folds: int = 5, seed: int = 0) -> int:
    """
    Exhaustive search for the hidden-layer size

    Every candidate is scored by k-fold mean validation accuracy. Ties go to
    the smaller network.

    Returns:
        Best number of hidden units
    """
    if not candidates:
        raise ValueError("No hidden-unit candidates given")
    ordered = sorted(set(int(c) for c in candidates))
    if len(ordered) == 1:
        return ordered[0]

    splits = list(kfold_indices(len(data), folds, seed))
    best_n, best_score = ordered[0], -1.0
    for n_hidden in ordered:
        cfg = MlpConfig(**{**asdict(template), 'n_hidden': n_hidden})
        scores = []
        for train_idx, val_idx in splits:
            model = train_scg(cfg, data.subset(train_idx))
            val = data.subset(val_idx)
            scores.append(accuracy(model.predict(val.inputs), val.labels()))
        score = float(np.mean(scores))
        logger.info("Hidden units %d: mean validation accuracy %.4f", n_hidden, score)
        if score > best_score:
            best_n, best_score = n_hidden, score
    return best_n


def single_layer_objective(W: np.ndarray, activations: np.ndarray, targets: np.ndarray,
                           alpha: float = 0.0, beta: float = 1.0) -> float:
    """Cross-entropy of a single linear layer (bias last row) on fixed activations"""
    a = activations @ W[:-1] + W[-1]
    return beta * cross_entropy(a, targets) + 0.5 * alpha * float(np.sum(W[:-1] ** 2))


def single_layer_gradient(W: np.ndarray, activations: np.ndarray, targets: np.ndarray,
                          alpha: float = 0.0, beta: float = 1.0) -> np.ndarray:
    y = output_activation(activations @ W[:-1] + W[-1])
    delta = beta * (y - targets)
    g = np.vstack([activations.T @ delta, delta.sum(axis=0)])
    g[:-1] += alpha * W[:-1]
    return g


def train_single_layer(activations: np.ndarray, targets: np.ndarray, alpha: float = 0.0,
                       beta: float = 1.0, max_iterations: int = 200,
                       tolerance: float = 1.0e-6) -> np.ndarray:
    """
    Fit one sigmoid/softmax layer on a fixed activation matrix with SCG

    Starts from zero weights, so the result is deterministic.

    Returns:
        Weights of shape (n_activations + 1, K), bias last
    """
    activations = np.atleast_2d(np.asarray(activations, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(activations.shape[0], -1)
    shape = (activations.shape[1] + 1, targets.shape[1])

    result = scg_minimize(
        lambda w: single_layer_objective(w.reshape(shape), activations, targets, alpha, beta),
        lambda w: single_layer_gradient(w.reshape(shape), activations, targets, alpha, beta).ravel(),
        np.zeros(shape[0] * shape[1]),
        max_iterations=max_iterations,
        tolerance=tolerance,
    )
    return result.weights.reshape(shape)


@dataclass(frozen=True)
class MlpLearner(WeakLearner):
    """Builds MLP classifiers from labeled data"""
    n_hidden: int = 5
    alpha: float = 0.01
    beta: float = 1.0
    max_iterations: int = 200
    tolerance: float = 1.0e-6
    error_goal: Optional[float] = None
    accuracy_goal: Optional[float] = None

    kind = 'mlp'

    def train(self, X: np.ndarray, y: np.ndarray, seed: int) -> MlpModel:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        classes = tuple(int(c) for c in np.unique(y))
        targets = class_targets(y, classes)
        cfg = MlpConfig(
            n_inputs=X.shape[1],
            n_hidden=self.n_hidden,
            n_outputs=targets.shape[1],
            alpha=self.alpha,
            beta=self.beta,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            seed=seed,
            error_goal=self.error_goal,
            accuracy_goal=self.accuracy_goal,
        )
        return train_scg(cfg, TrainingSet(X, targets), classes=classes)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, **asdict(self)}
