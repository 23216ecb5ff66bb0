import numpy as np
import pytest

from models.detection_models import BucketingConfig, BucketSpec
from services.bucketing_service import (
    _assign_nearest, _lloyd, _update_centroids, amplify_round, assign, fit, histogram,
    init_centroids, merge_small_bins,
)
from utils.errors import OutOfRange, TooFewSamples


@pytest.fixture
def half_spec():
    return BucketSpec(centroids=(0.25, 0.75), boundaries=(0.0, 0.5, 1.0))


def test_init_centroids_three_points():
    """Empate no maior 1-NN vai para o menor valor"""
    assert init_centroids([0.0, 0.5, 1.0], 1) == [0.0]


def test_init_centroids_uniform_are_distinct(rng):
    centroids = init_centroids(rng.random(100), 5)
    assert len(centroids) == 5
    assert len(set(centroids)) == 5
    assert centroids == sorted(centroids)


def test_init_centroids_duplicated_grid():
    """
    Grade 0.0..0.9 repetida 10x: todo ponto tem 1-NN = 0, o primeiro escolhido
    é 0.0 e a remoção de floor(N/k) = 50 vizinhos deixa 0.5 como menor restante.
    """
    values = np.repeat(np.arange(10) / 10.0, 10)
    assert init_centroids(values, 2) == [0.0, 0.5]


def test_init_centroids_too_few_samples():
    with pytest.raises(TooFewSamples):
        init_centroids([0.1, 0.2, 0.3], 2)
    with pytest.raises(TooFewSamples):
        init_centroids([], 1)


def test_fit_two_symmetric_clusters():
    values = [0.3] * 200 + [0.7] * 200
    spec = fit(values, BucketingConfig(k_init=2))
    assert spec.k == 2
    assert spec.boundaries == pytest.approx((0.0, 0.5, 1.0))
    assert histogram(spec, values).tolist() == [200, 200]


def test_fit_uniform_respects_floor(rng):
    values = rng.random(1000)
    spec = fit(values, BucketingConfig(k_init=5))
    assert spec.k == 5
    assert histogram(spec, values).min() >= 5


def test_fit_isolated_point_shrinks_k():
    values = [0.1] * 999 + [0.9]
    spec = fit(values, BucketingConfig(k_init=5))
    assert spec.k < 5
    counts = histogram(spec, values)
    assert counts.sum() == 1000
    assert spec.k == 1 or counts.min() >= 5


def test_fit_floor_property_random_trials(rng):
    """Em 200 tentativas com 500 amostras, todo bin tem contagem >= 5 ou k = 1"""
    config = BucketingConfig()
    for trial in range(200):
        shape = trial % 3
        if shape == 0:
            values = rng.random(500)
        elif shape == 1:
            values = rng.beta(0.3, 4.0, size=500)
        else:
            values = np.round(rng.random(500), 1)
        spec = fit(values, config)
        counts = histogram(spec, values)
        assert counts.sum() == 500
        assert spec.k == 1 or counts.min() >= config.min_expected


def test_fit_small_window_uses_equal_width_bins():
    values = [0.05, 0.15, 0.95]
    spec = fit(values, BucketingConfig(k_init=5, min_expected=1))
    # Bins de largura igual; os vazios são fundidos até que todos tenham >= 1 valor
    assert spec.boundaries[0] == 0.0 and spec.boundaries[-1] == 1.0
    assert histogram(spec, values).min() >= 1


def test_fit_is_deterministic(rng):
    values = rng.random(300)
    config = BucketingConfig()
    assert fit(values, config) == fit(values.copy(), config)


def test_fit_rejects_empty_and_out_of_range():
    with pytest.raises(TooFewSamples):
        fit([], BucketingConfig())
    with pytest.raises(OutOfRange):
        fit([0.2, 1.2], BucketingConfig())


def test_amplify_round_never_grows_largest_cluster(rng):
    for _ in range(50):
        data = np.sort(rng.beta(0.5, 3.0, size=400))
        centroids = np.unique(init_centroids(data, 5))
        labels = np.argmin(np.abs(data[:, None] - centroids[None, :]), axis=1)
        sizes = np.bincount(labels, minlength=centroids.size)
        largest = int(np.argmax(sizes))

        new_labels = amplify_round(data, centroids, labels, theta=2.0)
        new_sizes = np.bincount(new_labels, minlength=centroids.size)
        assert new_sizes[largest] <= sizes[largest]


def test_merge_small_bins_prefers_smaller_neighbour():
    spec = BucketSpec(centroids=(0.1, 0.3, 0.5, 0.7, 0.9), boundaries=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
    values = [0.1] * 10 + [0.3] * 6 + [0.5] * 2 + [0.7] * 3 + [0.9] * 10
    merged = merge_small_bins(spec, values, min_expected=5)
    # O bin 2 (2 valores) funde com o bin 3 (3 valores), o vizinho menor
    assert merged.boundaries == pytest.approx((0.0, 0.2, 0.4, 0.8, 1.0))
    assert histogram(merged, values).tolist() == [10, 6, 5, 10]


def test_assign_boundaries(half_spec):
    assert assign(half_spec, 0.25) == 0
    assert assign(half_spec, 0.5) == 1
    assert assign(half_spec, 1.0) == 1
    assert assign(half_spec, 0.0) == 0
    with pytest.raises(OutOfRange):
        assign(half_spec, 1.01)
    with pytest.raises(OutOfRange):
        assign(half_spec, -0.1)


def test_histogram_examples(half_spec):
    assert histogram(half_spec, [0.1, 0.2, 0.9]).tolist() == [2, 1]
    assert histogram(half_spec, []).tolist() == [0, 0]


def test_histogram_matches_assign_loop(rng):
    spec = fit(rng.random(2000), BucketingConfig())
    values = rng.random(10_000)
    brute = np.zeros(spec.k, dtype=int)
    for v in values:
        brute[assign(spec, float(v))] += 1
    assert histogram(spec, values).tolist() == brute.tolist()


def test_bucket_spec_validation():
    with pytest.raises(ValueError):
        BucketSpec(centroids=(0.2, 0.1), boundaries=(0.0, 0.15, 1.0))
    with pytest.raises(ValueError):
        BucketSpec(centroids=(0.2,), boundaries=(0.1, 1.0))


def test_sorted_lloyd_matches_distance_matrix_version(rng):
    """Lloyd por blocos contíguos converge para os mesmos clusters do Lloyd com matriz de distâncias"""
    data = np.sort(np.concatenate([rng.normal(0.2, 0.05, 400), rng.normal(0.7, 0.1, 600)]).clip(0.0, 1.0))
    start = np.asarray(init_centroids(data, 5))
    centroids, labels = _lloyd(data, start)

    expected = start
    previous = None
    for _ in range(100):
        labels_ref = _assign_nearest(data, expected)
        expected, labels_ref = _update_centroids(data, labels_ref, expected)
        if previous is not None and np.array_equal(labels_ref, previous):
            break
        previous = labels_ref

    np.testing.assert_allclose(centroids, expected, rtol=1e-9)
    np.testing.assert_array_equal(labels, labels_ref)
    assert np.all(np.diff(labels) >= 0)
