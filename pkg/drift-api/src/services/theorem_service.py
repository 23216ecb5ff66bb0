import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.detection_models import BucketingConfig, ContingencyTable, PropertyReport, PuSample
from services.baseline_service import DDM, DetectorStatus, PageHinkley
from services.chi2_service import chi_square_statistic, chi_square_test
from services.detector_service import build_table, error_rate_and_std, theorem1_check, theorem_histogram
from services.stream_service import gen_equal_error_counterexample
from utils.logger import get_logger

logger = get_logger("theorem-service")

# Limiar de p-valor exigido da tabela PUDD no contraexemplo
WITNESS_P_VALUE = 1e-5


def _random_partition(rng: np.random.Generator) -> List[float]:
    n_bins = int(rng.integers(1, 6))
    interior = np.sort(rng.choice(np.arange(1, 100), size=n_bins - 1, replace=False)) / 100.0
    return [0.0, *interior.tolist(), 1.0]


def _window_from_histogram(
    rng: np.random.Generator, counts: Sequence[int], partition: Sequence[float]
) -> List[PuSample]:
    """Amostras cujo histograma teórico é exatamente counts; PU sorteado dentro de cada bin"""
    window = [PuSample(pu=float(u), correct=True) for u in rng.random(counts[0])]
    for b, n in enumerate(counts[1:]):
        lo, hi = partition[b], partition[b + 1]
        for u in rng.uniform(lo, hi, size=n):
            window.append(PuSample(pu=float(min(u, hi)), correct=False))
    order = rng.permutation(len(window))
    return [window[i] for i in order]


def equal_proportion_pair(rng: np.random.Generator) -> Tuple[List[PuSample], List[PuSample], List[float]]:
    """Par de janelas com proporções idênticas no histograma teórico e PU distintos"""
    partition = _random_partition(rng)
    base = rng.integers(0, 6, size=len(partition))
    if base.sum() == 0:
        base[0] = 1
    scale1, scale2 = rng.integers(1, 5, size=2)
    w1 = _window_from_histogram(rng, (base * scale1).tolist(), partition)
    w2 = _window_from_histogram(rng, (base * scale2).tolist(), partition)
    return w1, w2, partition


def theorem1_suite(n_pairs: int = 1000, seed: int = 0) -> PropertyReport:
    """
    Proporções iguais no histograma teórico implicam taxas de erro iguais
    (exatas) e desvio padrão igual a sqrt(ē - ē²).
    """
    rng = np.random.default_rng(seed)
    failures = 0
    max_std_error = 0.0
    for _ in range(n_pairs):
        w1, w2, partition = equal_proportion_pair(rng)
        if not theorem1_check(w1, w2, partition):
            failures += 1
            continue
        for window in (w1, w2):
            rate, variance = error_rate_and_std(window)
            errors = np.array([0.0 if s.correct else 1.0 for s in window])
            max_std_error = max(max_std_error, abs(float(errors.std()) - math.sqrt(float(variance))))
        if max_std_error > 1e-12:
            failures += 1

    report = PropertyReport(
        name="theorem1",
        cases=n_pairs,
        failures=failures,
        details={"max_std_error": max_std_error},
    )
    logger.info("Suíte de proporções concluída", cases=n_pairs, failures=failures)
    return report


def _baseline_stable(errors: Sequence[int], shift_at: int, detector) -> bool:
    """True se o detector não sinaliza drift da mudança de distribuição em diante"""
    for i, e in enumerate(errors):
        status = detector.update(int(e))
        if i >= shift_at and status == DetectorStatus.DRIFT:
            return False
    return True


def theorem2_witness(seed: int = 0, n_per_window: int = 1000, config: Optional[BucketingConfig] = None) -> dict:
    """
    Contraexemplo de taxa de erro igual: mesma taxa (0.5) e desvio (0.5) nas
    duas janelas, histogramas de PU-index diferentes.
    """
    config = config or BucketingConfig()
    w1, w2 = gen_equal_error_counterexample(seed, n_per_window)
    rate1, var1 = error_rate_and_std(w1)
    rate2, var2 = error_rate_and_std(w2)

    def split(window):
        uc = np.array([s.pu for s in window if s.correct])
        um = np.array([s.pu for s in window if not s.correct])
        return uc, um

    uc1, um1 = split(w1)
    uc2, um2 = split(w2)
    table, spec = build_table(uc1, uc2, um1, um2, config)
    pudd = chi_square_test(table, dof=spec.k)

    error_table = ContingencyTable(counts=[[uc1.size, um1.size], [uc2.size, um2.size]])
    error_only = chi_square_statistic(error_table).statistic

    partition = [0.0, 0.5, 0.9, 1.0]
    errors = [0 if s.correct else 1 for s in (*w1, *w2)]
    return {
        "error_rate": (float(rate1), float(rate2)),
        "error_std": (math.sqrt(var1), math.sqrt(var2)),
        "rates_equal": rate1 == rate2 and var1 == var2,
        "histograms_differ": theorem_histogram(w1, partition) != theorem_histogram(w2, partition),
        "pudd_p_value": pudd.p_value,
        "error_only_statistic": error_only,
        "ddm_stable": _baseline_stable(errors, n_per_window, DDM()),
        "ph_stable": _baseline_stable(errors, n_per_window, PageHinkley()),
    }


def theorem2_suite(n_runs: int = 100, n_per_window: int = 1000, seed: int = 0) -> PropertyReport:
    """
    Testemunha de taxa de erro igual em n_runs sementes: taxas e desvios
    exatamente iguais, p-valor PUDD < 1e-5 em toda execução e DDM/PH estáveis
    em pelo menos 95% delas.
    """
    failures = 0
    stable = 0
    max_p = 0.0
    for run in range(n_runs):
        witness = theorem2_witness(seed + run, n_per_window)
        if not witness["rates_equal"] or witness["error_only_statistic"] != 0.0:
            failures += 1
        if not witness["histograms_differ"] or witness["pudd_p_value"] >= WITNESS_P_VALUE:
            failures += 1
        max_p = max(max_p, witness["pudd_p_value"])
        stable += int(witness["ddm_stable"] and witness["ph_stable"])

    stable_rate = stable / n_runs
    if stable_rate < 0.95:
        failures += 1
    logger.info("Suíte de taxa de erro igual concluída", runs=n_runs, failures=failures, stable_rate=stable_rate)
    return PropertyReport(
        name="theorem2",
        cases=n_runs,
        failures=failures,
        details={"max_pudd_p_value": max_p, "baseline_stable_rate": stable_rate},
    )
