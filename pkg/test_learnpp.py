import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from classifiers.base import Classifier, WeakLearner
from classifiers.mlp import MlpLearner
from ensemble.learnpp import (
    ERROR_FLOOR,
    EnsembleState,
    InstanceDistribution,
    LearnppError,
    SessionConfig,
    WeakHypothesis,
    classify,
    composite_predict,
    confidence,
    init_distribution,
    run_session,
    sample_subsets,
    votes,
    weak_error,
)
from exporters.snapshot_exporter import snapshot_exporter


class LookupClassifier(Classifier):
    """Predicts a fixed label per instance index stored in column 0"""

    kind = 'lookup'

    def __init__(self, labels, classes=(0, 1)):
        self.labels = np.asarray(labels)
        self._classes = tuple(classes)

    @property
    def classes(self):
        return self._classes

    @property
    def n_inputs(self):
        return 1

    def predict(self, X):
        X = np.atleast_2d(X)
        return self.labels[X[:, 0].astype(int)]

    def to_dict(self):
        return {'labels': self.labels.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data['labels'])


class ScriptedLearner(WeakLearner):
    """Hands out the scripted hypotheses in order, ignoring the training subset"""

    kind = 'scripted'

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0

    def train(self, X, y, seed):
        labels = self.script[min(self.calls, len(self.script) - 1)]
        self.calls += 1
        return LookupClassifier(labels)

    def to_dict(self):
        return {'kind': self.kind}


X_TRACE = np.arange(8, dtype=float).reshape(-1, 1)
Y_TRACE = np.array([0, 0, 0, 0, 1, 1, 1, 1])

H1 = [0, 0, 0, 0, 1, 1, 1, 0]
H2 = [0, 0, 0, 1, 1, 1, 1, 1]
H_BAD = [1, 1, 1, 1, 0, 0, 0, 0]
H3 = [0, 0, 0, 0, 1, 1, 1, 1]


def scripted_subsets(pairs):
    """Stands in for sample_subsets, handing out fixed (TR, TE) index lists"""
    pairs = iter(pairs)

    def sample(distribution, labels, tr_fraction, rng, retries=100):
        tr, te = next(pairs)
        return np.array(tr), np.array(te)
    return sample


def test_session_trace_matches_hand_computation(monkeypatch):
    # TR and TE leave out instances 5 and 6, then 7, so eps is taken over part of the database
    monkeypatch.setattr('ensemble.learnpp.sample_subsets', scripted_subsets([
        ([0, 1, 2, 3, 4, 4], [7, 0]),
        ([0, 1, 3, 3, 4, 5], [6, 2]),
        ([0, 1, 2, 3, 4, 5], [6, 7]),
        ([0, 1, 2, 3, 4, 5], [6, 7]),
    ]))
    state = EnsembleState(learner=ScriptedLearner([H1, H2, H_BAD, H3]), seed=0)
    result = run_session(state, X_TRACE, Y_TRACE, SessionConfig(hypotheses=3))

    assert result.session == 1
    assert result.discarded == 1
    assert len(result.trace) == 3
    first, second, third = result.trace

    # H1 misses instance 7 only: mass 1/8 out of the 6/8 drawn
    assert_allclose(first.distribution, np.full(8, 1 / 8), atol=1e-12)
    assert first.error == pytest.approx(1 / 6, abs=1e-12)
    assert first.beta == pytest.approx(1 / 5, abs=1e-12)
    assert first.composite_error == pytest.approx(1 / 8, abs=1e-12)
    assert first.composite_beta == pytest.approx(1 / 7, abs=1e-12)
    d2 = [1 / 14] * 7 + [1 / 2]
    assert_allclose(first.next_distribution, d2, atol=1e-12)

    # H2 misses instance 3: 1/14 out of the 1/2 drawn. ln 6 > ln 5, so H2 decides
    # where the two disagree and the composite misses instance 3 only
    assert_allclose(second.distribution, d2, atol=1e-12)
    assert second.error == pytest.approx(1 / 7, abs=1e-12)
    assert second.beta == pytest.approx(1 / 6, abs=1e-12)
    assert second.composite_error == pytest.approx(1 / 14, abs=1e-12)
    assert second.composite_beta == pytest.approx(1 / 13, abs=1e-12)
    d3 = [1 / 26, 1 / 26, 1 / 26, 1 / 2, 1 / 26, 1 / 26, 1 / 26, 7 / 26]
    assert_allclose(second.next_distribution, d3, atol=1e-12)

    floored = ERROR_FLOOR / (1 - ERROR_FLOOR)
    assert third.error == 0.0
    assert third.beta == pytest.approx(floored, rel=1e-12)
    assert third.composite_error == 0.0
    assert third.composite_beta == pytest.approx(floored, rel=1e-12)
    assert_allclose(third.next_distribution, d3, atol=1e-12)

    assert [h.index for h in result.hypotheses] == [1, 2, 3]
    assert result.hypotheses[0].psi == pytest.approx(math.log(5))
    assert result.hypotheses[1].psi == pytest.approx(math.log(6))
    assert result.composite_accuracy == 1.0
    assert state.classes == (0, 1)
    assert len(state.sessions) == 1


def test_errors_outside_the_drawn_subsets_do_not_count(monkeypatch):
    monkeypatch.setattr('ensemble.learnpp.sample_subsets', scripted_subsets([
        ([0, 1, 2, 3, 4, 5], [6, 6]),
    ]))
    state = EnsembleState(learner=ScriptedLearner([H1]), seed=0)
    result = run_session(state, X_TRACE, Y_TRACE, SessionConfig(hypotheses=1))

    entry = result.trace[0]
    assert entry.error == 0.0
    assert entry.beta == pytest.approx(ERROR_FLOOR / (1 - ERROR_FLOOR), rel=1e-12)
    # The composite is still scored on the whole database
    assert entry.composite_error == pytest.approx(1 / 8, abs=1e-12)


def test_weak_error_sums_misclassified_mass():
    dist = InstanceDistribution(np.array([0.05, 0.1, 0.15, 0.2, 0.2, 0.3]))
    X = np.arange(6, dtype=float).reshape(-1, 1)
    y = np.array([0, 1, 0, 1, 0, 1])
    h = LookupClassifier([0, 0, 1, 1, 0, 0])
    assert weak_error(h, X, y, dist) == pytest.approx(0.1 + 0.15 + 0.3)
    assert weak_error(LookupClassifier(y), X, y, dist) == 0.0
    assert weak_error(LookupClassifier([0] * 6), X, y, init_distribution(6)) == pytest.approx(0.5)


def test_restricted_distribution_is_renormalized():
    dist = InstanceDistribution(np.array([0.1, 0.2, 0.3, 0.4]))
    assert_allclose(dist.restrict(np.array([1, 3])).D, [1 / 3, 2 / 3])


def test_learner_that_never_beats_half_raises():
    state = EnsembleState(learner=ScriptedLearner([H_BAD]), seed=0)
    with pytest.raises(LearnppError, match='cannot beat 0.5'):
        run_session(state, X_TRACE, Y_TRACE, SessionConfig(hypotheses=2, max_retries=3))
    assert state.sessions == []


def test_init_distribution_and_update():
    dist = init_distribution(4)
    assert_allclose(dist.D, [0.25] * 4)
    updated = dist.update(np.array([True, True, False, False]), 0.5)
    assert_allclose(updated.D, [1 / 6, 1 / 6, 1 / 3, 1 / 3])
    assert updated.D.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        init_distribution(0)
    with pytest.raises(ValueError):
        InstanceDistribution(np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        InstanceDistribution(np.array([1.0, -0.5]))


def test_subset_sizes_and_class_coverage():
    labels = np.array([0] * 9 + [1] * 3)
    dist = init_distribution(12)
    rng = np.random.default_rng(0)
    for _ in range(20):
        tr, te = sample_subsets(dist, labels, 2 / 3, rng)
        assert len(tr) == 8 and len(te) == 4
        assert len(np.unique(labels[tr])) == 2
        assert len(np.unique(labels[te])) == 2


def test_subset_sizes_for_tiny_databases():
    rng = np.random.default_rng(1)
    tr, te = sample_subsets(init_distribution(1), np.array([3]), 2 / 3, rng)
    assert len(tr) == 1 and len(te) == 1
    tr, te = sample_subsets(init_distribution(2), np.array([0, 1]), 0.9, rng)
    assert len(tr) == 1 and len(te) == 1


def test_subsets_follow_the_distribution():
    labels = np.array([0, 1, 0, 1])
    dist = InstanceDistribution(np.array([0.0, 0.0, 1.0, 1.0]))
    tr, te = sample_subsets(dist, labels, 0.5, np.random.default_rng(2))
    assert set(tr) <= {2, 3} and set(te) <= {2, 3}


def test_subsets_fail_when_mass_sits_on_one_class():
    labels = np.array([0, 0, 1, 1])
    dist = InstanceDistribution(np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(LearnppError):
        sample_subsets(dist, labels, 0.5, np.random.default_rng(0), retries=5)


def test_selection_frequencies_match_a_uniform_distribution():
    m, draws = 5, 4000
    labels = np.zeros(m, dtype=int)
    rng = np.random.default_rng(12)
    counts = np.zeros(m)
    for _ in range(draws):
        tr, te = sample_subsets(init_distribution(m), labels, 2 / 3, rng)
        counts += np.bincount(np.concatenate([tr, te]), minlength=m)

    n = counts.sum()
    assert n == draws * m
    standard_error = math.sqrt((1 / m) * (1 - 1 / m) / n)
    assert np.all(np.abs(counts / n - 1 / m) <= 3 * standard_error)


def test_concentrated_distribution_puts_the_instance_in_every_training_subset():
    m = 10
    weights = np.full(m, 0.03 / (m - 1))
    weights[4] = 0.97
    dist = InstanceDistribution(weights)
    labels = np.zeros(m, dtype=int)
    rng = np.random.default_rng(5)

    hits = 0
    for _ in range(1000):
        tr, _te = sample_subsets(dist, labels, 2 / 3, rng)
        assert len(tr) == 7
        hits += 4 in tr
    # P(missing) = 0.03 ** 7 per draw
    assert hits / 1000 >= 1 - 0.03 ** 7


def hypothesis(labels, beta, session=1, index=1, classes=(0, 1, 2)):
    return WeakHypothesis(LookupClassifier(labels, classes), beta, session, index, error=beta / (1 + beta))


def three_class_state():
    h1 = hypothesis([0, 1, 2], 0.25)
    h2 = hypothesis([1, 1, 2], 0.5, index=2)
    h3 = hypothesis([1, 2, 2], 0.0625, session=2)
    return EnsembleState(learner=ScriptedLearner([]), class_set=(0, 1, 2), sessions=[[h1, h2], [h3]])


def test_votes_and_classification():
    state = three_class_state()
    X = np.arange(3, dtype=float).reshape(-1, 1)
    xi = votes(state, X)
    ln2 = math.log(2)
    assert_allclose(xi[0], [2 * ln2, 5 * ln2, 0.0])
    assert_allclose(xi[1], [0.0, 3 * ln2, 4 * ln2])
    assert_allclose(xi[2], [0.0, 0.0, 7 * ln2])
    assert_array_equal(classify(state, X), [1, 2, 2])
    assert classify(state, np.array([0.0])) == 1
    assert isinstance(classify(state, np.array([0.0])), int)


def test_confidence_sums_to_one():
    state = three_class_state()
    gamma = confidence(state, np.arange(3, dtype=float).reshape(-1, 1))
    assert_allclose(gamma.sum(axis=1), 1.0)
    assert_allclose(gamma[2], [0.0, 0.0, 1.0])
    assert_allclose(gamma[0], [2 / 7, 5 / 7, 0.0])
    single = confidence(state, np.array([1.0]))
    assert single.shape == (3,)


def scripted_five(scale=1.0):
    rng = np.random.default_rng(21)
    hyps = [
        hypothesis(rng.integers(0, 3, size=12).tolist(), beta ** scale, index=i + 1)
        for i, beta in enumerate([0.1, 0.2, 0.3, 0.4, 0.45])
    ]
    return EnsembleState(learner=ScriptedLearner([]), class_set=(0, 1, 2), sessions=[hyps[:3], hyps[3:]])


def test_classification_matches_a_brute_force_tally():
    state = scripted_five()
    X = np.arange(12, dtype=float).reshape(-1, 1)
    expected = []
    for i in range(12):
        tally = {c: 0.0 for c in (0, 1, 2)}
        for h in state.hypotheses():
            tally[int(h.classifier.labels[i])] += math.log(1 / h.beta)
        expected.append(max((0, 1, 2), key=lambda c: (tally[c], -c)))
    assert_array_equal(classify(state, X), expected)


def test_classification_ignores_hypothesis_order():
    state = scripted_five()
    X = np.arange(12, dtype=float).reshape(-1, 1)
    before = classify(state, X)
    gamma = confidence(state, X)

    hyps = state.hypotheses()
    order = np.random.default_rng(3).permutation(len(hyps))
    shuffled = [hyps[i] for i in order]
    state.sessions = [shuffled[:2], shuffled[2:]]
    assert_array_equal(classify(state, X), before)
    assert_allclose(confidence(state, X), gamma, atol=1e-12)


def test_confidence_ignores_uniform_scaling_of_voting_weights():
    # beta ** c scales every ln(1 / beta) by c
    X = np.arange(12, dtype=float).reshape(-1, 1)
    base = confidence(scripted_five(), X)
    for c in (0.5, 3.0):
        assert_allclose(confidence(scripted_five(scale=c), X), base, atol=1e-12)
    assert_allclose(base.sum(axis=1), 1.0, atol=1e-12)


def test_vote_ties_go_to_smallest_class():
    h1 = hypothesis([0], 0.5, classes=(0, 1))
    h2 = hypothesis([1], 0.5, index=2, classes=(0, 1))
    assert_array_equal(composite_predict([h1, h2], np.array([[0.0]]), (0, 1)), [0])


def test_empty_ensemble_rejected():
    state = EnsembleState(learner=ScriptedLearner([]))
    with pytest.raises(ValueError, match='empty ensemble'):
        classify(state, np.array([0.0]))


def test_beta_must_lie_in_open_interval():
    with pytest.raises(ValueError):
        WeakHypothesis(LookupClassifier([0]), 1.0, 1, 1, 0.5)


def blobs(seed, per_class=30):
    rng = np.random.default_rng(seed)
    centers = [(0.2, 0.2), (0.8, 0.2), (0.5, 0.8)]
    X = np.vstack([rng.normal(c, 0.08, size=(per_class, 2)) for c in centers])
    return np.clip(X, 0.0, 1.0), np.repeat([0, 1, 2], per_class)


def test_new_class_session_widens_class_set():
    X, y = blobs(0)
    state = EnsembleState(learner=MlpLearner(n_hidden=3, max_iterations=40), seed=4)
    first = y < 2
    run_session(state, X[first], y[first], SessionConfig(hypotheses=2))
    assert state.classes == (0, 1)
    run_session(state, X, y, SessionConfig(hypotheses=2))
    assert state.classes == (0, 1, 2)
    assert [len(s) for s in state.sessions] == [2, 2]
    assert confidence(state, X).shape == (90, 3)


def test_snapshot_round_trip_preserves_classifications(tmp_path):
    X, y = blobs(1)
    state = EnsembleState(learner=MlpLearner(n_hidden=3, max_iterations=40), seed=7)
    run_session(state, X, y, SessionConfig(hypotheses=3))

    path = snapshot_exporter.save(state, tmp_path / 'ensemble.json')
    restored, normalization = snapshot_exporter.load(path)
    assert normalization is None
    assert isinstance(restored, EnsembleState)
    assert restored.classes == state.classes
    assert_array_equal(classify(restored, X), classify(state, X))
    assert_allclose(confidence(restored, X), confidence(state, X))


def test_restored_ensemble_continues_like_the_original():
    X, y = blobs(2)
    a = EnsembleState(learner=MlpLearner(n_hidden=3, max_iterations=40), seed=11)
    run_session(a, X[:45], y[:45], SessionConfig(hypotheses=2))
    b = EnsembleState.from_dict(a.to_dict())

    run_session(a, X, y, SessionConfig(hypotheses=2))
    run_session(b, X, y, SessionConfig(hypotheses=2))
    assert_array_equal(classify(a, X), classify(b, X))
    assert [h.beta for h in a.sessions[1]] == [h.beta for h in b.sessions[1]]
