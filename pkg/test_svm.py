import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.optimize import minimize

from classifiers.svm import (
    KernelSpec,
    SvmClassifier,
    SvmConfig,
    SvmLearner,
    cross_validate,
    decision,
    dual_objective,
    gram_matrix,
    kernel_eval,
    kkt_violations,
    train_svm,
)

KERNELS = [KernelSpec('linear'), KernelSpec('polynomial', degree=2), KernelSpec('gaussian', width=0.7)]


def brute_force_dual(gram, y, C):
    """Reference optimum of the dual from a general-purpose solver"""
    m = len(y)
    Q = np.outer(y, y) * gram
    result = minimize(
        lambda a: 0.5 * a @ Q @ a - a.sum(),
        np.zeros(m),
        jac=lambda a: Q @ a - 1.0,
        bounds=[(0.0, C)] * m,
        constraints=[{'type': 'eq', 'fun': lambda a: a @ y, 'jac': lambda a: y}],
        method='SLSQP',
        options={'ftol': 1.0e-12, 'maxiter': 1000},
    )
    return -result.fun


def small_instance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 7))
    X = rng.normal(size=(m, 2))
    y = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    C = float(rng.choice([0.5, 1.0, 10.0]))
    kernel = KERNELS[seed % len(KERNELS)]
    return X, y, C, kernel


@pytest.mark.parametrize('seed', range(10))
def test_smo_matches_brute_force_dual(seed):
    X, y, C, kernel = small_instance(seed)
    config = SvmConfig(C=C, kernel=kernel, tolerance=1.0e-5, max_passes=1000, seed=seed)
    model = train_svm(X, y, config)

    reference = brute_force_dual(gram_matrix(kernel, X, X), y, C)
    assert abs(model.dual_objective() - reference) < 1.0e-3

    assert np.all(model.alphas >= 0.0) and np.all(model.alphas <= C)
    assert abs(np.sum(model.alphas * model.labels)) < 1.0e-9
    assert kkt_violations(model, X, y, tolerance=2 * config.tolerance + 1.0e-6) == []


def test_symmetric_pair():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([1.0, -1.0])
    model = train_svm(X, y, SvmConfig(C=10.0))
    assert_allclose(model.alphas, [0.5, 0.5])
    assert abs(model.b) < 1.0e-12
    assert decision(model, np.array([2.0, 5.0]))[1] == 1
    assert decision(model, np.array([-0.5, 0.0]))[1] == -1


def test_zero_score_counts_as_positive():
    X = np.array([[1.0], [-1.0]])
    model = train_svm(X, np.array([1.0, -1.0]), SvmConfig())
    assert decision(model, np.array([0.0])) == (0.0, 1)


def test_dual_objective_formula():
    gram = np.array([[1.0, 0.5], [0.5, 2.0]])
    alphas = np.array([0.2, 0.2])
    labels = np.array([1.0, -1.0])
    assert dual_objective(alphas, labels, gram) == pytest.approx(0.4 - 0.5 * (0.04 - 0.04 + 0.08))


@pytest.mark.parametrize('kernel', KERNELS)
def test_gram_matrix_is_psd_and_matches_kernel_eval(kernel):
    X = np.random.default_rng(0).normal(size=(8, 3))
    K = gram_matrix(kernel, X, X)
    assert_allclose(K, K.T, atol=1.0e-12)
    assert np.min(np.linalg.eigvalsh(K)) > -1.0e-9
    assert K[2, 5] == pytest.approx(kernel_eval(kernel, X[2], X[5]))


def test_labels_must_be_plus_minus_one():
    with pytest.raises(ValueError):
        train_svm(np.zeros((2, 1)), np.array([0.0, 1.0]), SvmConfig())
    with pytest.raises(ValueError, match='single class'):
        train_svm(np.zeros((2, 1)), np.array([1.0, 1.0]), SvmConfig())


def test_kernel_parse():
    assert KernelSpec.parse('linear') == KernelSpec('linear')
    assert KernelSpec.parse('gaussian:0.5') == KernelSpec('gaussian', width=0.5)
    assert KernelSpec.parse('polynomial:3:2') == KernelSpec('polynomial', degree=3, offset=2.0)
    for bad in ('rbf', 'gaussian', 'gaussian:-1', 'polynomial:x'):
        with pytest.raises(ValueError):
            KernelSpec.parse(bad)


def three_blobs(seed, per_class=15, spread=0.4):
    rng = np.random.default_rng(seed)
    centers = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]
    X = np.vstack([rng.normal(c, spread, size=(per_class, 2)) for c in centers])
    return X, np.repeat([0, 1, 2], per_class)


def test_one_vs_rest_classifier():
    X, y = three_blobs(0)
    model = SvmClassifier.fit(X, y, SvmConfig(C=1.0, kernel=KernelSpec('gaussian', width=1.0)))
    assert len(model.machines) == 3
    assert model.decision_function(X).shape == (45, 3)
    assert np.mean(model.predict(X) == y) >= 0.95
    restored = SvmClassifier.from_dict(model.to_dict())
    assert_array_equal(restored.predict(X), model.predict(X))


def test_binary_classifier_uses_original_labels():
    X, y = three_blobs(1)
    keep = y < 2
    model = SvmLearner(C=1.0).train(X[keep], y[keep] + 4, seed=0)
    assert model.classes == (4, 5)
    assert len(model.machines) == 1
    assert set(np.unique(model.predict(X[keep]))) <= {4, 5}


def test_cross_validate_grid():
    X, y = three_blobs(2)
    with pytest.raises(ValueError):
        cross_validate(X, y, [], [1.0])
    single = cross_validate(X, y, [KernelSpec('gaussian', width=2.0)], [3.0])
    assert single.C == 3.0 and single.kernel.kind == 'gaussian'


def test_cross_validate_ties_prefer_small_c_and_simple_kernel():
    X, y = three_blobs(3, spread=0.15)
    best = cross_validate(X, y, [KernelSpec('gaussian', width=1.0), KernelSpec('linear')],
                          [10.0, 1.0], folds=3)
    assert best.C == 1.0
    assert best.kernel.kind == 'linear'
