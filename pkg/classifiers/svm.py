"""
Soft-margin kernel SVM
C-SVC trained by sequential minimal optimization, one-vs-rest for several classes
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from classifiers.base import Classifier, WeakLearner, accuracy, kfold_indices

logger = logging.getLogger(__name__)

KERNEL_KINDS = ('linear', 'polynomial', 'gaussian')

# Multipliers closer than this to 0 or C are snapped onto the bound
ALPHA_EPS = 1.0e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its parameters"""
    kind: str = 'linear'
    degree: int = 2
    offset: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"Unknown kernel {self.kind!r}, expected one of {KERNEL_KINDS}")
        if self.kind == 'polynomial' and self.degree < 1:
            raise ValueError(f"Polynomial degree must be >= 1, got {self.degree}")
        if self.kind == 'gaussian' and self.width <= 0:
            raise ValueError(f"Gaussian width must be > 0, got {self.width}")

    @property
    def complexity(self) -> int:
        """Rank used to break ties: linear < polynomial < gaussian"""
        return KERNEL_KINDS.index(self.kind)

    def describe(self) -> str:
        if self.kind == 'polynomial':
            return f"polynomial(degree={self.degree}, offset={self.offset:g})"
        if self.kind == 'gaussian':
            return f"gaussian(width={self.width:g})"
        return 'linear'

    @classmethod
    def parse(cls, text: str) -> 'KernelSpec':
        """
        Parse 'linear', 'polynomial:DEGREE[:OFFSET]' or 'gaussian:WIDTH'
        """
        parts = [p.strip() for p in text.strip().split(':')]
        kind = parts[0].lower()
        try:
            if kind == 'linear' and len(parts) == 1:
                return cls('linear')
            if kind == 'polynomial' and len(parts) in (2, 3):
                offset = float(parts[2]) if len(parts) == 3 else 1.0
                return cls('polynomial', degree=int(parts[1]), offset=offset)
            if kind == 'gaussian' and len(parts) == 2:
                return cls('gaussian', width=float(parts[1]))
        except ValueError as e:
            raise ValueError(f"Invalid kernel {text!r}: {e}")
        raise ValueError(f"Invalid kernel {text!r}")


def kernel_eval(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> float:
    """Kernel value of two vectors"""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"Kernel arguments differ in shape: {x.shape} vs {x2.shape}")
    if spec.kind == 'linear':
        return float(x @ x2)
    if spec.kind == 'polynomial':
        return float((x @ x2 + spec.offset) ** spec.degree)
    diff = x - x2
    return float(np.exp(-(diff @ diff) / (2.0 * spec.width ** 2)))


def gram_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kernel values of every row of A against every row of B"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if spec.kind == 'linear':
        return A @ B.T
    if spec.kind == 'polynomial':
        return (A @ B.T + spec.offset) ** spec.degree
    return np.exp(-cdist(A, B, 'sqeuclidean') / (2.0 * spec.width ** 2))


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tolerance: float = 1.0e-3
    max_passes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), 'kernel': asdict(self.kernel)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SvmConfig':
        return cls(**{**data, 'kernel': KernelSpec(**data['kernel'])})


@dataclass
class SvmModel:
    """Binary machine: support vectors, labels in {-1, +1}, multipliers and bias"""
    support_vectors: np.ndarray
    labels: np.ndarray
    alphas: np.ndarray
    b: float
    kernel: KernelSpec
    C: float
    support_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __post_init__(self):
        self.support_vectors = np.atleast_2d(np.asarray(self.support_vectors, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        self.alphas = np.asarray(self.alphas, dtype=float).ravel()
        self.support_indices = np.asarray(self.support_indices, dtype=int).ravel()
        if not (len(self.labels) == len(self.alphas) == self.support_vectors.shape[0]):
            raise ValueError("Support vectors, labels and alphas must have equal length")
        if np.any(np.abs(self.labels) != 1.0):
            raise ValueError("SVM labels must be -1 or +1")
        if np.any(self.alphas < 0) or np.any(self.alphas > self.C):
            raise ValueError(f"Multipliers must lie in [0, {self.C}]")

    @property
    def n_support(self) -> int:
        return len(self.alphas)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.n_support == 0:
            return np.full(X.shape[0], self.b)
        return gram_matrix(self.kernel, X, self.support_vectors) @ (self.alphas * self.labels) + self.b

    def dual_objective(self) -> float:
        gram = gram_matrix(self.kernel, self.support_vectors, self.support_vectors)
        return dual_objective(self.alphas, self.labels, gram)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'support_vectors': self.support_vectors.tolist(),
            'labels': self.labels.tolist(),
            'alphas': self.alphas.tolist(),
            'b': float(self.b),
            'kernel': asdict(self.kernel),
            'C': float(self.C),
            'support_indices': self.support_indices.tolist(),
            'dimension': int(self.support_vectors.shape[1]),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SvmModel':
        shape = (len(data['alphas']), int(data['dimension']))
        return cls(
            support_vectors=np.array(data['support_vectors'], dtype=float).reshape(shape),
            labels=np.array(data['labels'], dtype=float),
            alphas=np.array(data['alphas'], dtype=float),
            b=float(data['b']),
            kernel=KernelSpec(**data['kernel']),
            C=float(data['C']),
            support_indices=np.array(data.get('support_indices', []), dtype=int),
        )


def dual_objective(alphas: np.ndarray, labels: np.ndarray, gram: np.ndarray) -> float:
    """sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij"""
    v = np.asarray(alphas) * np.asarray(labels)
    return float(np.sum(alphas) - 0.5 * v @ gram @ v)


def decision(model: SvmModel, x: np.ndarray) -> Tuple[float, int]:
    """Score of one input and its class; a zero score counts as +1"""
    score = float(model.scores(np.asarray(x, dtype=float).reshape(1, -1))[0])
    return score, (1 if score >= 0 else -1)


class _SmoSolver:
    """Pairwise dual updates over a full Gram matrix with an error cache"""

    def __init__(self, gram: np.ndarray, y: np.ndarray, config: SvmConfig):
        self.K = gram
        self.y = y
        self.C = config.C
        self.tol = config.tolerance
        self.m = len(y)
        self.alpha = np.zeros(self.m)
        self.b = 0.0
        # E_i = f(x_i) - y_i
        self.errors = -y.astype(float)
        self.rng = np.random.default_rng(config.seed)

    def violates(self, i: int) -> bool:
        r = self.y[i] * self.errors[i]
        return (r < -self.tol and self.alpha[i] < self.C) or (r > self.tol and self.alpha[i] > 0)

    def take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        K, y, C = self.K, self.y, self.C
        ai, aj = self.alpha[i], self.alpha[j]
        yi, yj = y[i], y[j]
        Ei, Ej = self.errors[i], self.errors[j]
        s = yi * yj

        if yi != yj:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L < ALPHA_EPS:
            return False

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > ALPHA_EPS:
            aj_new = min(max(aj + yj * (Ei - Ej) / eta, L), H)
        else:
            # Flat or concave along the constraint line: take the better end
            def gain(a):
                return yj * (Ei - Ej) * (a - aj) - 0.5 * eta * (a - aj) ** 2
            gain_l, gain_h = gain(L), gain(H)
            if max(gain_l, gain_h) <= ALPHA_EPS:
                return False
            aj_new = L if gain_l > gain_h else H

        if abs(aj_new - aj) < 1.0e-8 * (aj_new + aj + 1.0e-8):
            return False

        ai_new = ai + s * (aj - aj_new)
        ai_new = 0.0 if ai_new < ALPHA_EPS else (C if ai_new > C - ALPHA_EPS else ai_new)
        aj_new = 0.0 if aj_new < ALPHA_EPS else (C if aj_new > C - ALPHA_EPS else aj_new)

        dai, daj = ai_new - ai, aj_new - aj
        b1 = self.b - Ei - yi * dai * K[i, i] - yj * daj * K[i, j]
        b2 = self.b - Ej - yi * dai * K[i, j] - yj * daj * K[j, j]
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.errors += yi * dai * K[i] + yj * daj * K[j] + (b_new - self.b)
        self.alpha[i], self.alpha[j] = ai_new, aj_new
        self.b = b_new
        return True

    def examine(self, i: int) -> bool:
        """Try a random partner for violator i, then every other index in seeded order"""
        j = int(self.rng.integers(self.m - 1))
        if j >= i:
            j += 1
        if self.take_step(i, j):
            return True
        for k in self.rng.permutation(self.m):
            if k != i and k != j and self.take_step(i, int(k)):
                return True
        return False

    def solve(self, max_passes: int) -> int:
        passes = 0
        while passes < max_passes:
            changed = 0
            for i in range(self.m):
                if self.violates(i) and self.examine(i):
                    changed += 1
            passes += 1
            if changed == 0:
                break
        else:
            logger.warning("SMO stopped at the pass limit (%d) with KKT violations left", max_passes)
        return passes

    def final_bias(self) -> float:
        free = (self.alpha > 0.0) & (self.alpha < self.C)
        if not np.any(free):
            return self.b
        v = self.alpha * self.y
        return float(np.mean(self.y[free] - self.K[free] @ v))


def train_svm(X: np.ndarray, y: np.ndarray, config: SvmConfig,
              gram: Optional[np.ndarray] = None) -> SvmModel:
    """
    Train a binary soft-margin SVM by SMO

    Args:
        X: Training inputs
        y: Labels in {-1, +1}; both classes must be present
        config: C, kernel, KKT tolerance, pass cap and seed
        gram: Precomputed Gram matrix of X (optional)

    Returns:
        SvmModel keeping only the samples with alpha > 0
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != len(y):
        raise ValueError(f"{X.shape[0]} inputs but {len(y)} labels")
    if np.any(np.abs(y) != 1.0):
        raise ValueError("SVM labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("SVM training needs both classes, got a single class")
    if gram is None:
        gram = gram_matrix(config.kernel, X, X)

    solver = _SmoSolver(gram, y, config)
    passes = solver.solve(config.max_passes)
    b = solver.final_bias()

    support = np.flatnonzero(solver.alpha > 0.0)
    logger.debug("SMO finished in %d passes: %d support vectors of %d", passes, len(support), len(y))
    return SvmModel(
        support_vectors=X[support],
        labels=y[support],
        alphas=solver.alpha[support],
        b=b,
        kernel=config.kernel,
        C=config.C,
        support_indices=support,
    )


def kkt_violations(model: SvmModel, X: np.ndarray, y: np.ndarray, tolerance: float) -> List[int]:
    """
    Training indices whose multiplier and margin break the KKT conditions

    The model must come from `train_svm` on the same (X, y).
    """
    y = np.asarray(y, dtype=float).ravel()
    alpha = np.zeros(len(y))
    alpha[model.support_indices] = model.alphas
    margins = y * model.scores(X)
    bad = []
    for i, (a, m) in enumerate(zip(alpha, margins)):
        if a == 0.0 and m < 1.0 - tolerance:
            bad.append(i)
        elif 0.0 < a < model.C and abs(m - 1.0) > tolerance:
            bad.append(i)
        elif a == model.C and m > 1.0 + tolerance:
            bad.append(i)
    return bad


@dataclass
class SvmClassifier(Classifier):
    """Binary SVM over arbitrary labels, or one-vs-rest machines for more classes"""
    config: SvmConfig
    class_labels: Tuple[int, ...]
    machines: List[SvmModel]

    kind = 'svm'

    def __post_init__(self):
        self.class_labels = tuple(int(c) for c in self.class_labels)
        expected = 1 if len(self.class_labels) == 2 else len(self.class_labels)
        if len(self.class_labels) < 2 or len(self.machines) != expected:
            raise ValueError(f"{len(self.class_labels)} classes need {expected} machines, got {len(self.machines)}")

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, config: SvmConfig) -> 'SvmClassifier':
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y)
        classes = tuple(int(c) for c in np.unique(y))
        if len(classes) < 2:
            raise ValueError("SVM training needs at least two classes")
        gram = gram_matrix(config.kernel, X, X)
        if len(classes) == 2:
            targets = [np.where(y == classes[1], 1.0, -1.0)]
        else:
            targets = [np.where(y == c, 1.0, -1.0) for c in classes]
        machines = [train_svm(X, t, config, gram=gram) for t in targets]
        return cls(config, classes, machines)

    @property
    def classes(self) -> Tuple[int, ...]:
        return self.class_labels

    @property
    def n_inputs(self) -> int:
        return self.machines[0].support_vectors.shape[1]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Binary: one score per row. One-vs-rest: one column per class"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.machines) == 1:
            return self.machines[0].scores(X)
        return np.column_stack([m.scores(X) for m in self.machines])

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision_function(X)
        labels = np.asarray(self.class_labels)
        if scores.ndim == 1:
            return np.where(scores >= 0, labels[1], labels[0])
        return labels[np.argmax(scores, axis=1)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config.to_dict(),
            'classes': list(self.class_labels),
            'machines': [m.to_dict() for m in self.machines],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SvmClassifier':
        return cls(
            config=SvmConfig.from_dict(data['config']),
            class_labels=tuple(data['classes']),
            machines=[SvmModel.from_dict(m) for m in data['machines']],
        )

    def get_model_info(self) -> Dict[str, Any]:
        info = super().get_model_info()
        info.update(
            kernel=self.config.kernel.describe(),
            C=self.config.C,
            support_vectors=[m.n_support for m in self.machines],
        )
        return info


def cross_validate(X: np.ndarray, y: np.ndarray, kernels: Sequence[KernelSpec],
                   Cs: Sequence[float], folds: int = 5, seed: int = 0,
                   tolerance: float = 1.0e-3, max_passes: int = 100) -> SvmConfig:
    """
    Grid search over kernels and capacities by k-fold mean accuracy

    Ties go to the smaller C, then to the simpler kernel.

    Returns:
        Best SvmConfig
    """
    if not kernels or not Cs:
        raise ValueError("Empty SVM grid: need at least one kernel and one C")
    grid = sorted(((float(C), k) for C in Cs for k in kernels),
                  key=lambda cell: (cell[0], cell[1].complexity))
    if len(grid) == 1:
        C, kernel = grid[0]
        return SvmConfig(C=C, kernel=kernel, tolerance=tolerance, max_passes=max_passes, seed=seed)

    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    splits = list(kfold_indices(len(y), folds, seed))

    best, best_score = None, -1.0
    for C, kernel in grid:
        cfg = SvmConfig(C=C, kernel=kernel, tolerance=tolerance, max_passes=max_passes, seed=seed)
        scores = []
        for train_idx, val_idx in splits:
            if len(np.unique(y[train_idx])) < 2:
                scores.append(0.0)
                continue
            model = SvmClassifier.fit(X[train_idx], y[train_idx], cfg)
            scores.append(accuracy(model.predict(X[val_idx]), y[val_idx]))
        score = float(np.mean(scores))
        logger.info("SVM %s C=%g: mean validation accuracy %.4f", kernel.describe(), C, score)
        if score > best_score:
            best, best_score = cfg, score
    return best


@dataclass(frozen=True)
class SvmLearner(WeakLearner):
    """Builds SVM classifiers from labeled data"""
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tolerance: float = 1.0e-3
    max_passes: int = 50

    kind = 'svm'

    def train(self, X: np.ndarray, y: np.ndarray, seed: int) -> SvmClassifier:
        cfg = SvmConfig(C=self.C, kernel=self.kernel, tolerance=self.tolerance,
                        max_passes=self.max_passes, seed=seed)
        return SvmClassifier.fit(X, y, cfg)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'C': self.C, 'kernel': asdict(self.kernel),
                'tolerance': self.tolerance, 'max_passes': self.max_passes}
