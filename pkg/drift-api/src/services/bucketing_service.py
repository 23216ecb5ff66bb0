from typing import List, Sequence, Tuple

import numpy as np

from models.detection_models import BucketingConfig, BucketSpec
from utils.errors import OutOfRange, TooFewSamples
from utils.logger import get_logger

logger = get_logger("bucketing-service")

# Limite de iterações de Lloyd
MAX_KMEANS_ITERATIONS = 100


def _as_unit_array(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size and (np.isnan(arr).any() or arr.min() < 0.0 or arr.max() > 1.0):
        raise OutOfRange("Todos os valores de PU-index devem estar em [0, 1]")
    return arr


def _nearest_window(work: np.ndarray, idx: int, m: int) -> Tuple[int, int]:
    """
    Janela [lo, hi) com o ponto idx e seus m vizinhos mais próximos.

    Em dados ordenados os m vizinhos mais próximos formam um bloco contíguo;
    empates favorecem o bloco mais à esquerda (valores menores).
    """
    size = min(m + 1, work.size)
    first = max(0, idx - size + 1)
    last = min(idx, work.size - size)
    starts = np.arange(first, last + 1)
    x = work[idx]
    cost = np.maximum(x - work[starts], work[starts + size - 1] - x)
    lo = int(starts[int(np.argmin(cost))])
    return lo, lo + size


def init_centroids(values: Sequence[float], k: int) -> List[float]:
    """
    Inicialização de centróides do Ei-kMeans.

    A cada iteração escolhe o ponto restante com maior distância ao vizinho
    mais próximo (empate: menor valor) e o remove junto com seus floor(N/k)
    vizinhos mais próximos da cópia de trabalho.

    Returns:
        Lista ordenada com k centróides (podem repetir valores em dados duplicados)

    Raises:
        TooFewSamples: se len(values) < 2k ou a cópia de trabalho se esgotar
    """
    work = np.sort(_as_unit_array(values))
    n = work.size
    if k < 1 or n < k or n < 2 * k:
        raise TooFewSamples(f"{n} amostras não bastam para {k} centróides")

    m = n // k
    centroids = []
    for _ in range(k):
        if work.size == 0:
            raise TooFewSamples("Cópia de trabalho esgotada antes de k centróides")
        if work.size == 1:
            idx = 0
        else:
            gaps = np.diff(work)
            nn_dist = np.empty(work.size)
            nn_dist[0] = gaps[0]
            nn_dist[-1] = gaps[-1]
            nn_dist[1:-1] = np.minimum(gaps[:-1], gaps[1:])
            idx = int(np.argmax(nn_dist))
        centroids.append(float(work[idx]))
        lo, hi = _nearest_window(work, idx, m)
        work = np.concatenate([work[:lo], work[hi:]])
    return sorted(centroids)


def _assign_nearest(data: np.ndarray, centroids: np.ndarray, weights: np.ndarray = None) -> np.ndarray:
    dist = np.abs(data[:, None] - centroids[None, :])
    if weights is not None:
        dist = dist * weights[None, :]
    # argmin devolve o menor índice em caso de empate
    return np.argmin(dist, axis=1)


def _update_centroids(data: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Médias dos clusters; clusters vazios são descartados e os rótulos reindexados"""
    k = centroids.size
    counts = np.bincount(labels, minlength=k)
    sums = np.bincount(labels, weights=data, minlength=k)
    alive = counts > 0
    new_centroids = sums[alive] / counts[alive]
    remap = np.cumsum(alive) - 1
    return new_centroids, remap[labels]


def _block_splits(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Fronteiras [0, s_1, ..., N] dos blocos de dados ordenados mais próximos de cada centróide"""
    mids = (centroids[:-1] + centroids[1:]) / 2.0
    # Ponto exatamente no meio fica com o centróide menor
    inner = np.searchsorted(data, mids, side="right")
    return np.concatenate(([0], inner, [data.size]))


def _lloyd(data: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lloyd em 1-D sobre dados ordenados.

    Com centróides ordenados cada cluster é um bloco contíguo dos dados, de
    modo que a atribuição sai de um searchsorted nos pontos médios e as
    médias de somas acumuladas. Blocos vazios são descartados.
    """
    cumsum = np.concatenate(([0.0], np.cumsum(data)))
    splits = _block_splits(data, centroids)
    for _ in range(MAX_KMEANS_ITERATIONS):
        sizes = np.diff(splits)
        alive = sizes > 0
        ends = splits[1:][alive]
        current = np.concatenate(([0], ends))
        centroids = (cumsum[ends] - cumsum[current[:-1]]) / sizes[alive]
        splits = _block_splits(data, centroids)
        if np.array_equal(splits, current):
            break
    labels = np.repeat(np.arange(centroids.size), np.diff(splits))
    return centroids, labels


def amplify_round(data: np.ndarray, centroids: np.ndarray, labels: np.ndarray, theta: float) -> np.ndarray:
    """
    Uma rodada de amplify-shrink: distâncias multiplicadas por
    exp(theta * |C_j| / (N - 1)) e reatribuição pelo argmin.
    """
    n = data.size
    if n < 2:
        return labels
    sizes = np.bincount(labels, minlength=centroids.size)
    weights = np.exp(theta * sizes / (n - 1))
    return _assign_nearest(data, centroids, weights)


def _spec_from_centroids(centroids: np.ndarray) -> BucketSpec:
    centroids = np.unique(centroids)
    mids = (centroids[:-1] + centroids[1:]) / 2.0
    return BucketSpec(
        centroids=tuple(float(c) for c in centroids),
        boundaries=(0.0, *(float(b) for b in mids), 1.0),
    )


def _equal_width_spec(k: int) -> BucketSpec:
    edges = np.linspace(0.0, 1.0, k + 1)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return BucketSpec(
        centroids=tuple(float(c) for c in centers),
        boundaries=tuple(float(e) for e in edges),
    )


def merge_small_bins(spec: BucketSpec, values: Sequence[float], min_expected: float) -> BucketSpec:
    """
    Funde bins adjacentes até que todo bin tenha contagem >= min_expected ou k = 1.

    O menor bin (menor índice no empate) é fundido com o vizinho de menor
    contagem (o da esquerda no empate).
    """
    counts = histogram(spec, values).tolist()
    centroids = list(spec.centroids)
    edges = list(spec.boundaries)

    while len(counts) > 1 and min(counts) < min_expected:
        i = counts.index(min(counts))
        if i == 0:
            j = 1
        elif i == len(counts) - 1:
            j = i - 1
        else:
            j = i - 1 if counts[i - 1] <= counts[i + 1] else i + 1
        lo = min(i, j)
        merged = counts[lo] + counts[lo + 1]
        if merged > 0:
            centroid = (centroids[lo] * counts[lo] + centroids[lo + 1] * counts[lo + 1]) / merged
        else:
            centroid = (centroids[lo] + centroids[lo + 1]) / 2.0
        counts[lo:lo + 2] = [merged]
        centroids[lo:lo + 2] = [centroid]
        del edges[lo + 1]
        logger.debug("Bins adjacentes fundidos", left=lo, k=len(counts), count=merged)

    return BucketSpec(centroids=tuple(centroids), boundaries=tuple(edges))


def fit(values: Sequence[float], config: BucketingConfig) -> BucketSpec:
    """
    Ajusta o Adaptive PU-index Bucketing sobre os PU-index corretamente classificados.

    Etapas: inicialização Ei-kMeans, Lloyd em 1-D até estabilizar (ou 100
    iterações), rodadas de amplify-shrink enquanto algum bin tiver menos de
    min_expected amostras e, por fim, fusão de bins adjacentes.

    Raises:
        TooFewSamples: se values estiver vazio
    """
    data = np.sort(_as_unit_array(values))
    if data.size == 0:
        raise TooFewSamples("Nenhum valor para ajustar o bucketing")

    try:
        initial = np.unique(init_centroids(data, config.k_init))
    except TooFewSamples:
        logger.debug("Janela pequena, usando bins de largura igual", n=int(data.size), k=config.k_init)
        return merge_small_bins(_equal_width_spec(config.k_init), data, config.min_expected)

    centroids, labels = _lloyd(data, initial)
    spec = _spec_from_centroids(centroids)

    rounds = 0
    while (
        spec.k > 1
        and rounds < config.max_amplify_rounds
        and histogram(spec, data).min() < config.min_expected
    ):
        labels = amplify_round(data, centroids, labels, config.theta)
        centroids, labels = _update_centroids(data, labels, centroids)
        spec = _spec_from_centroids(centroids)
        rounds += 1

    return merge_small_bins(spec, data, config.min_expected)


def assign(spec: BucketSpec, value: float) -> int:
    """Índice do bin de um PU-index (bins fechados à esquerda, último fechado à direita)"""
    if not 0.0 <= value <= 1.0:
        raise OutOfRange(f"PU-index {value} fora de [0, 1]")
    return spec.bin_of(value)


def histogram(spec: BucketSpec, values: Sequence[float]) -> np.ndarray:
    """Contagem de valores por bin; soma igual a len(values)"""
    arr = _as_unit_array(values)
    if arr.size == 0:
        return np.zeros(spec.k, dtype=np.int64)
    return np.bincount(spec.bins_of(arr), minlength=spec.k).astype(np.int64)
