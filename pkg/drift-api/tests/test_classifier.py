import numpy as np
import pytest
from sklearn.naive_bayes import GaussianNB

from services.classifier_service import (
    VAR_FLOOR, GaussianNaiveBayes, error_indicator, error_indicators, pu_index, pu_indices,
)
from utils.errors import DimensionMismatch, LabelOutOfRange, UntrainedClass


def _blobs(rng, n=400):
    y = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, 3)) + y[:, None] * np.array([2.0, -1.0, 0.5])
    return X, y


def test_partial_fit_in_batches_matches_full_fit(rng):
    X, y = _blobs(rng, 500)
    streamed = GaussianNaiveBayes(2, 3)
    for batch_X, batch_y in zip(np.array_split(X, 7), np.array_split(y, 7)):
        streamed.partial_fit(batch_X, batch_y)
    batch = GaussianNaiveBayes(2, 3).fit(X, y)
    np.testing.assert_array_equal(streamed.class_count_, batch.class_count_)
    np.testing.assert_allclose(streamed.theta_, batch.theta_, rtol=1e-10)
    np.testing.assert_allclose(streamed.var_, batch.var_, rtol=1e-8)


def test_empty_batch_is_noop(rng):
    X, y = _blobs(rng, 50)
    model = GaussianNaiveBayes(2, 3).fit(X, y)
    before = model.var_.copy()
    model.partial_fit(np.empty((0, 3)), np.empty(0))
    np.testing.assert_array_equal(model.var_, before)


def test_partial_fit_one_at_a_time_equals_fit(rng):
    X, y = _blobs(rng, 200)
    streamed = GaussianNaiveBayes(2, 3)
    for xi, yi in zip(X, y):
        streamed.partial_fit(xi, yi)
    batch = GaussianNaiveBayes(2, 3).fit(X, y)
    np.testing.assert_allclose(streamed.theta_, batch.theta_, rtol=1e-10)
    np.testing.assert_allclose(streamed.var_, batch.var_, rtol=1e-8)
    np.testing.assert_array_equal(streamed.class_count_, batch.class_count_)


def test_predict_proba_matches_sklearn(rng):
    X, y = _blobs(rng)
    ours = GaussianNaiveBayes(2, 3).fit(X, y)
    reference = GaussianNB().fit(X, y)
    X_test = rng.normal(size=(50, 3))
    np.testing.assert_allclose(ours.predict_proba(X_test), reference.predict_proba(X_test), rtol=1e-7, atol=1e-10)
    np.testing.assert_array_equal(ours.predict(X_test), reference.predict(X_test))


def test_predict_proba_rows_sum_to_one_far_from_data(rng):
    X, y = _blobs(rng)
    model = GaussianNaiveBayes(2, 3).fit(X, y)
    proba = model.predict_proba(np.full((3, 3), 1e3))
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert np.isfinite(proba).all()


def test_untrained_class_raises(rng):
    model = GaussianNaiveBayes(2, 3)
    model.partial_fit(rng.normal(size=(10, 3)), np.zeros(10, dtype=int))
    assert not model.is_ready
    with pytest.raises(UntrainedClass):
        model.predict_proba(rng.normal(size=(1, 3)))


def test_invalid_inputs():
    model = GaussianNaiveBayes(2, 3)
    with pytest.raises(DimensionMismatch):
        model.partial_fit(np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(DimensionMismatch):
        model.partial_fit(np.zeros((4, 3)), np.zeros(3))
    with pytest.raises(LabelOutOfRange):
        model.partial_fit(np.zeros((2, 3)), [0, 2])
    with pytest.raises(ValueError):
        GaussianNaiveBayes(1, 3)


def test_reset_discards_state(rng):
    X, y = _blobs(rng, 50)
    model = GaussianNaiveBayes(2, 3).fit(X, y)
    model.reset()
    assert model.class_count_.sum() == 0
    assert model.epsilon_ == pytest.approx(1e-12)


def test_pu_index_examples():
    assert pu_index([0.8, 0.2], 0) == pytest.approx(0.2)
    assert pu_index([0.8, 0.2], 1) == pytest.approx(0.8)
    assert pu_index([1.0, 0.0], 0) == 0.0
    with pytest.raises(LabelOutOfRange):
        pu_index([0.5, 0.5], 2)


def test_error_indicator_ties_go_to_lower_class():
    assert error_indicator([0.5, 0.5], 0) == 0
    assert error_indicator([0.5, 0.5], 1) == 1
    assert error_indicator([0.1, 0.9], 1) == 0


def test_vectorized_helpers_match_scalar(rng):
    proba = rng.dirichlet([1.0, 1.0, 1.0], size=100)
    y = rng.integers(0, 3, size=100)
    np.testing.assert_allclose(pu_indices(proba, y), [pu_index(p, t) for p, t in zip(proba, y)])
    np.testing.assert_array_equal(error_indicators(proba, y), [error_indicator(p, t) for p, t in zip(proba, y)])
    with pytest.raises(LabelOutOfRange):
        pu_indices(proba, np.full(100, 3))


def test_symmetric_classes_at_midpoint():
    """Médias ±1, priors iguais: em x = 0 as duas classes empatam"""
    X = np.array([[-2.0], [0.0], [0.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    model = GaussianNaiveBayes(2, 1).fit(X, y)
    np.testing.assert_allclose(model.theta_.ravel(), [-1.0, 1.0])
    np.testing.assert_allclose(model.predict_proba([[0.0]]), [[0.5, 0.5]], atol=1e-12)


def test_far_tail_goes_to_nearest_class():
    X = np.array([[-2.0], [0.0], [0.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    model = GaussianNaiveBayes(2, 1).fit(X, y)
    assert model.predict_proba([[6.0]])[0, 1] > 0.99
    assert model.predict_proba([[-6.0]])[0, 0] > 0.99


def test_one_sample_per_class_uses_epsilon_variance():
    X = np.array([[1.0, 2.0], [3.0, 5.0]])
    model = GaussianNaiveBayes(2, 2).fit(X, [0, 1])
    np.testing.assert_array_equal(model.theta_, X)
    # epsilon = 1e-9 * maior variância por feature (2.25)
    assert model.epsilon_ == pytest.approx(2.25e-9)
    np.testing.assert_allclose(model.var_, model.epsilon_)


def test_constant_features_use_variance_floor():
    X = np.ones((2, 2))
    model = GaussianNaiveBayes(2, 2).fit(X, [0, 1])
    assert model.epsilon_ == VAR_FLOOR
    np.testing.assert_allclose(model.var_, VAR_FLOOR)
    proba = model.predict_proba(X)
    assert np.isfinite(proba).all()
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)


def test_floor_does_not_accumulate_over_updates():
    model = GaussianNaiveBayes(2, 2)
    for _ in range(50):
        model.partial_fit(np.ones((2, 2)), [0, 1])
    np.testing.assert_allclose(model.var_, VAR_FLOOR)
