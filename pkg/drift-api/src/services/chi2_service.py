import math
import sys
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from models.detection_models import ChiSquareResult, ContingencyTable
from utils.errors import ZeroMarginal

# Tolerância relativa das expansões da gama incompleta
GAMMA_TOLERANCE = 1e-12
GAMMA_MAX_ITERATIONS = 10_000

# Contagem observada mínima recomendada por célula
MIN_OBSERVED_COUNT = 50

_TINY = sys.float_info.min / sys.float_info.epsilon


def _expected_from_counts(counts: np.ndarray) -> np.ndarray:
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    if (row_sums == 0).any() or (col_sums == 0).any():
        raise ZeroMarginal(
            f"Tabela degenerada: linhas={row_sums.tolist()} colunas={col_sums.tolist()}"
        )
    total = float(counts.sum())
    return np.outer(row_sums, col_sums).astype(np.float64) / total


def expected_frequencies(table: ContingencyTable) -> np.ndarray:
    """
    Frequências esperadas sob independência: E_ij = n_i * n_j / N.

    Raises:
        ZeroMarginal: se alguma linha ou coluna somar zero
    """
    return _expected_from_counts(table.counts)


def pearson_statistic(counts: np.ndarray) -> Tuple[float, float]:
    """
    Estatística de Pearson e menor frequência esperada de uma matriz de
    contagens inteiras já validada, pela identidade sum(O^2 / E) - N.

    Raises:
        ZeroMarginal: se alguma linha ou coluna somar zero
    """
    expected = _expected_from_counts(counts)
    observed = counts.astype(np.float64)
    statistic = float((observed * observed / expected).sum() - observed.sum())
    return max(statistic, 0.0), float(expected.min())


def has_low_counts(counts: np.ndarray) -> bool:
    return bool((counts < MIN_OBSERVED_COUNT).any())


def chi_square_statistic(table: ContingencyTable) -> ChiSquareResult:
    """
    Estatística Qui-quadrado da tabela.

    O resultado traz apenas estatística e graus de liberdade; o p-valor fica
    a cargo de chi_square_p_value.
    """
    statistic, min_expected = pearson_statistic(table.counts)
    rows, cols = table.shape
    return ChiSquareResult(
        statistic=statistic,
        dof=(rows - 1) * (cols - 1),
        min_expected=min_expected,
        low_count_warning=has_low_counts(table.counts),
    )


def _lower_series(a: float, x: float) -> float:
    """P(a, x) pela expansão em série; converge rápido para x < a + 1"""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(GAMMA_MAX_ITERATIONS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * GAMMA_TOLERANCE:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_continued_fraction(a: float, x: float) -> float:
    """Q(a, x) pela fração contínua (Lentz modificado); usada para x >= a + 1"""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAX_ITERATIONS + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_TOLERANCE:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """Gama incompleta inferior regularizada P(a, x)"""
    if a <= 0:
        raise ValueError("a deve ser positivo")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return min(1.0, max(0.0, 1.0 - _upper_continued_fraction(a, x)))


def chi_square_p_value(statistic: float, dof: int) -> float:
    """
    p = 1 - P(dof/2, chi2/2), com P a gama incompleta inferior regularizada.

    Satura em 0 e 1; decrescente na estatística para dof fixo.
    """
    if dof < 1:
        raise ValueError("dof deve ser >= 1")
    if statistic < 0:
        raise ValueError("A estatística deve ser não negativa")
    if statistic == 0:
        return 1.0
    a = dof / 2.0
    x = statistic / 2.0
    if x < a + 1.0:
        p = 1.0 - _lower_series(a, x)
    else:
        p = _upper_continued_fraction(a, x)
    return min(1.0, max(0.0, p))


def chi_square_test(table: ContingencyTable, dof: Optional[int] = None) -> ChiSquareResult:
    """Estatística e p-valor; dof pode ser fixado pelo chamador (K na tabela PUDD)"""
    result = chi_square_statistic(table)
    dof = dof or result.dof
    return result.model_copy(
        update={"dof": dof, "p_value": chi_square_p_value(result.statistic, dof)}
    )


@lru_cache(maxsize=256)
def chi_square_critical_value(dof: int, sigma: float, tolerance: float = 1e-10) -> float:
    """Menor estatística cujo p-valor fica abaixo de sigma (bisseção, memoizada)"""
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma deve estar em (0, 1)")
    lo, hi = 0.0, max(1.0, float(dof))
    while chi_square_p_value(hi, dof) >= sigma:
        hi *= 2.0
    while hi - lo > tolerance * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi_square_p_value(mid, dof) >= sigma:
            lo = mid
        else:
            hi = mid
    return hi
