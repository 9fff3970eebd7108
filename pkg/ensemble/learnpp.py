"""
Learn++ incremental ensemble
Boosting-style sessions of weak hypotheses combined by weighted majority voting
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from classifiers.base import Classifier, WeakLearner, accuracy
from classifiers.mlp import MlpLearner
from classifiers.registry import model_registry

logger = logging.getLogger(__name__)

# Zero errors are floored so voting weights stay finite
ERROR_FLOOR = 1.0e-10

COMPOSITE_SCOPES = ('session', 'ensemble')


class LearnppError(RuntimeError):
    """Raised when a session cannot produce an acceptable hypothesis"""


@dataclass(frozen=True)
class InstanceDistribution:
    """Instance weights over one database; `D` is the normalized view"""
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.size == 0:
            raise ValueError("Distribution needs at least one instance")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)) or weights.sum() <= 0:
            raise ValueError("Distribution weights must be finite, non-negative and not all zero")
        object.__setattr__(self, 'weights', weights)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def D(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def update(self, correct: np.ndarray, B: float) -> 'InstanceDistribution':
        """Scale correctly classified instances by B, then renormalize"""
        w = self.D * np.where(np.asarray(correct, dtype=bool), B, 1.0)
        return InstanceDistribution(w / w.sum())

    def restrict(self, idx: np.ndarray) -> 'InstanceDistribution':
        """Distribution over the given instances only, renormalized"""
        return InstanceDistribution(self.weights[np.asarray(idx, dtype=int)])


def init_distribution(m: int) -> InstanceDistribution:
    """Uniform distribution over m instances"""
    if m < 1:
        raise ValueError(f"Distribution needs m >= 1, got {m}")
    return InstanceDistribution(np.full(m, 1.0 / m))


@dataclass
class WeakHypothesis:
    """Accepted hypothesis with its boosting bookkeeping"""
    classifier: Classifier
    beta: float
    session: int
    index: int
    error: float
    composite_error: float = 0.0
    composite_beta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def psi(self) -> float:
        """Voting weight ln(1/beta)"""
        return math.log(1.0 / self.beta)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'session': self.session,
            'index': self.index,
            'beta': self.beta,
            'error': self.error,
            'composite_error': self.composite_error,
            'composite_beta': self.composite_beta,
            'model_kind': self.classifier.kind,
            'model': self.classifier.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WeakHypothesis':
        return cls(
            classifier=model_registry.restore(data['model_kind'], data['model']),
            beta=float(data['beta']),
            session=int(data['session']),
            index=int(data['index']),
            error=float(data['error']),
            composite_error=float(data['composite_error']),
            composite_beta=float(data['composite_beta']),
        )


@dataclass(frozen=True)
class SessionConfig:
    hypotheses: int = 20
    tr_fraction: float = 2.0 / 3.0
    max_retries: int = 20
    seed: Optional[int] = None
    composite_scope: str = 'session'
    subset_retries: int = 100

    def __post_init__(self):
        errors = []
        if self.hypotheses < 1:
            errors.append(f"hypotheses must be >= 1, got {self.hypotheses}")
        if not 0.0 < self.tr_fraction < 1.0:
            errors.append(f"tr_fraction must lie in (0, 1), got {self.tr_fraction}")
        if self.max_retries < 1:
            errors.append(f"max_retries must be >= 1, got {self.max_retries}")
        if self.subset_retries < 1:
            errors.append(f"subset_retries must be >= 1, got {self.subset_retries}")
        if self.composite_scope not in COMPOSITE_SCOPES:
            errors.append(f"composite_scope must be one of {COMPOSITE_SCOPES}, got {self.composite_scope!r}")
        if errors:
            raise ValueError("Invalid session config: " + "; ".join(errors))


@dataclass(frozen=True)
class TraceEntry:
    """Distribution before and after one accepted hypothesis"""
    index: int
    distribution: Tuple[float, ...]
    error: float
    beta: float
    composite_error: float
    composite_beta: float
    next_distribution: Tuple[float, ...]


@dataclass
class SessionResult:
    session: int
    hypotheses: List[WeakHypothesis]
    trace: List[TraceEntry]
    discarded: int
    composite_accuracy: float
    mean_weak_accuracy: float

    def diagnostics(self) -> Dict[str, Any]:
        """Per-session boosting summary for reports"""
        return {
            'session': self.session,
            'hypotheses': len(self.hypotheses),
            'discarded': self.discarded,
            'composite_accuracy': self.composite_accuracy,
            'mean_weak_accuracy': self.mean_weak_accuracy,
            'errors': [h.error for h in self.hypotheses],
            'betas': [h.beta for h in self.hypotheses],
            'composite_errors': [h.composite_error for h in self.hypotheses],
        }


@dataclass
class EnsembleState(Classifier):
    """All sessions' hypotheses, the class set seen so far, and the weak learner"""
    learner: WeakLearner = field(default_factory=lambda: MlpLearner(n_hidden=5))
    seed: int = 0
    class_set: Tuple[int, ...] = ()
    sessions: List[List[WeakHypothesis]] = field(default_factory=list)

    kind = 'learnpp'

    @property
    def classes(self) -> Tuple[int, ...]:
        return self.class_set

    @property
    def n_inputs(self) -> int:
        hyps = self.hypotheses()
        if not hyps:
            raise ValueError("empty ensemble")
        return hyps[0].classifier.n_inputs

    def hypotheses(self) -> List[WeakHypothesis]:
        return [h for session in self.sessions for h in session]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return classify(self, np.atleast_2d(X))

    def predict_confidence(self, X: np.ndarray) -> np.ndarray:
        return confidence(self, np.atleast_2d(X))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learner': self.learner.to_dict(),
            'seed': self.seed,
            'classes': list(self.class_set),
            'sessions': [[h.to_dict() for h in session] for session in self.sessions],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EnsembleState':
        return cls(
            learner=model_registry.learner_from_dict(data['learner']),
            seed=int(data['seed']),
            class_set=tuple(int(c) for c in data['classes']),
            sessions=[[WeakHypothesis.from_dict(h) for h in session] for session in data['sessions']],
        )

    def get_model_info(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'classes': list(self.class_set),
            'learner': self.learner.to_dict(),
            'sessions': [len(s) for s in self.sessions],
            'hypotheses': len(self.hypotheses()),
        }


def sample_subsets(distribution: InstanceDistribution, labels: np.ndarray, tr_fraction: float,
                   rng: np.random.Generator, retries: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw training and testing index subsets from the distribution

    Both subsets are drawn with replacement. Subsets of two or more
    instances must cover at least two classes when the labels do.

    Returns:
        (TR indices, TE indices)
    """
    labels = np.asarray(labels)
    m = len(labels)
    if m == 0:
        raise ValueError("Cannot sample subsets from empty data")
    if len(distribution) != m:
        raise ValueError(f"Distribution covers {len(distribution)} instances, data has {m}")

    n_tr = min(max(math.ceil(tr_fraction * m - 1.0e-9), 1), max(m - 1, 1))
    n_te = max(m - n_tr, 1)
    need_two = len(np.unique(labels)) >= 2
    D = distribution.D

    def covers(idx):
        return len(idx) < 2 or len(np.unique(labels[idx])) >= 2

    for _ in range(retries):
        tr = rng.choice(m, size=n_tr, replace=True, p=D)
        te = rng.choice(m, size=n_te, replace=True, p=D)
        if not need_two or (covers(tr) and covers(te)):
            return tr, te
    raise LearnppError(f"Could not draw subsets covering two classes in {retries} attempts")


def weak_error(hypothesis: Classifier, X: np.ndarray, y: np.ndarray,
               distribution: InstanceDistribution) -> float:
    """Distribution mass of the instances the hypothesis gets wrong"""
    return _weighted_error(hypothesis.predict(X), y, distribution)


def _weighted_error(predicted: np.ndarray, y: np.ndarray, distribution: InstanceDistribution) -> float:
    return float(np.sum(distribution.D[np.asarray(predicted) != np.asarray(y)]))


def _normalized(error: float) -> float:
    error = max(error, ERROR_FLOOR)
    return error / (1.0 - error)


def _tally(predictions: Sequence[np.ndarray], psis: Sequence[float],
           classes: Sequence[int]) -> np.ndarray:
    """Vote matrix: summed voting weight per row and class"""
    classes = np.asarray(classes)
    n = len(predictions[0])
    votes = np.zeros((n, len(classes)))
    rows = np.arange(n)
    for pred, psi in zip(predictions, psis):
        idx = np.searchsorted(classes, pred)
        if np.any(idx >= len(classes)) or np.any(classes[np.minimum(idx, len(classes) - 1)] != pred):
            raise ValueError("Hypothesis predicted a label outside the ensemble's class set")
        votes[rows, idx] += psi
    return votes


def composite_predict(hypotheses: Sequence[WeakHypothesis], X: np.ndarray,
                      classes: Sequence[int]) -> np.ndarray:
    """Weighted majority vote of the given hypotheses; ties go to the smallest class"""
    if not hypotheses:
        raise ValueError("empty ensemble")
    X = np.atleast_2d(X)
    votes = _tally([h.classifier.predict(X) for h in hypotheses], [h.psi for h in hypotheses], classes)
    return np.asarray(classes)[np.argmax(votes, axis=1)]


def votes(state: EnsembleState, X: np.ndarray) -> np.ndarray:
    """Total vote each class receives from every retained hypothesis"""
    hyps = state.hypotheses()
    if not hyps:
        raise ValueError("empty ensemble")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _tally([h.classifier.predict(X) for h in hyps], [h.psi for h in hyps], state.class_set)


def classify(state: EnsembleState, x: np.ndarray):
    """
    Final hypothesis of the whole ensemble

    Args:
        state: Trained ensemble
        x: One input vector or a matrix of rows

    Returns:
        A class label, or an array of labels for a matrix
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(state.class_set)[np.argmax(votes(state, x), axis=1)]
    return int(labels[0]) if x.ndim == 1 else labels


def confidence(state: EnsembleState, x: np.ndarray) -> np.ndarray:
    """Normalized votes per class (columns follow `state.classes`)"""
    x = np.asarray(x, dtype=float)
    xi = votes(state, x)
    gamma = xi / xi.sum(axis=1, keepdims=True)
    return gamma[0] if x.ndim == 1 else gamma


def run_session(state: EnsembleState, X: np.ndarray, y: np.ndarray,
                config: SessionConfig) -> SessionResult:
    """
    Train one session of hypotheses on a new database

    Appends the accepted hypotheses to `state` as a new session and widens
    its class set. The session's generator is seeded from (seed, session
    number), so a restored ensemble continues exactly.

    Args:
        state: Ensemble to extend
        X: Database inputs
        y: Database labels
        config: Hypothesis count, subset fraction, retry budgets and seed

    Returns:
        SessionResult with the per-hypothesis trace
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int)
    m = len(y)
    if m == 0:
        raise ValueError("Session database is empty")
    if X.shape[0] != m:
        raise ValueError(f"{X.shape[0]} inputs but {m} labels")

    k = len(state.sessions) + 1
    seed = state.seed if config.seed is None else config.seed
    rng = np.random.default_rng([seed, k])
    state.class_set = tuple(sorted(set(state.class_set) | set(int(c) for c in np.unique(y))))
    classes = state.class_set

    pool = state.hypotheses() if config.composite_scope == 'ensemble' else []
    pool_preds = [h.classifier.predict(X) for h in pool]
    accepted: List[WeakHypothesis] = []
    accepted_preds: List[np.ndarray] = []
    trace: List[TraceEntry] = []
    discarded = 0
    dist = init_distribution(m)

    while len(accepted) < config.hypotheses:
        t = len(accepted) + 1
        failures = 0
        while True:
            tr, te = sample_subsets(dist, y, config.tr_fraction, rng, config.subset_retries)
            learner_seed = int(rng.integers(2 ** 31 - 1))
            classifier = state.learner.train(X[tr], y[tr], learner_seed)
            pred = classifier.predict(X)
            # Weak error on TR and TE; the composite error below uses the whole database
            drawn = np.unique(np.concatenate([tr, te]))
            eps = _weighted_error(pred[drawn], y[drawn], dist.restrict(drawn))
            if eps < 0.5:
                beta = _normalized(eps)
                candidate = WeakHypothesis(classifier, beta, k, t, eps)
                members = pool + accepted + [candidate]
                preds = pool_preds + accepted_preds + [pred]
                tally = _tally(preds, [h.psi for h in members], classes)
                composite = np.asarray(classes)[np.argmax(tally, axis=1)]
                E = _weighted_error(composite, y, dist)
                if E < 0.5:
                    break
                logger.warning("Session %d hypothesis %d: composite error %.4f >= 0.5, discarded", k, t, E)
            else:
                logger.warning("Session %d hypothesis %d: error %.4f >= 0.5, discarded", k, t, eps)
            discarded += 1
            failures += 1
            if failures >= config.max_retries:
                raise LearnppError("weak learner cannot beat 0.5 under current distribution")

        B = _normalized(E)
        candidate.composite_error = E
        candidate.composite_beta = B
        next_dist = dist.update(composite == y, B)
        trace.append(TraceEntry(
            index=t,
            distribution=tuple(dist.D.tolist()),
            error=eps,
            beta=beta,
            composite_error=E,
            composite_beta=B,
            next_distribution=tuple(next_dist.D.tolist()),
        ))
        logger.debug("Session %d hypothesis %d: eps=%.4f beta=%.4g E=%.4f B=%.4g", k, t, eps, beta, E, B)
        accepted.append(candidate)
        accepted_preds.append(pred)
        dist = next_dist

    state.sessions.append(accepted)

    session_votes = _tally(pool_preds + accepted_preds, [h.psi for h in pool + accepted], classes)
    composite_accuracy = accuracy(np.asarray(classes)[np.argmax(session_votes, axis=1)], y)
    mean_weak_accuracy = float(np.mean([accuracy(p, y) for p in accepted_preds]))
    logger.info("Session %d: %d hypotheses (%d discarded), composite accuracy %.4f, mean weak accuracy %.4f",
                k, len(accepted), discarded, composite_accuracy, mean_weak_accuracy)
    return SessionResult(
        session=k,
        hypotheses=accepted,
        trace=trace,
        discarded=discarded,
        composite_accuracy=composite_accuracy,
        mean_weak_accuracy=mean_weak_accuracy,
    )
