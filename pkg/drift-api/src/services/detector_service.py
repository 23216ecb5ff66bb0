import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.detection_models import (
    BucketingConfig, BucketSpec, ContingencyTable, CutOutcome, CutStatus,
    DetectionReport, DetectorConfig, PuSample, SkipHeuristic, SubStream, TableMode,
)
from services import bucketing_service
from services.chi2_service import (
    chi_square_critical_value, chi_square_p_value, has_low_counts, pearson_statistic,
)
from utils.errors import EmptyWindow, TooFewSamples, ZeroMarginal
from utils.logger import get_logger

logger = get_logger("detector-service")


def split_at_cut(sub: SubStream, r: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Separa o substream no corte r em (uC_first, uC_second, uM_first, uM_second).

    A primeira janela vai de t1 até r (inclusive) e a segunda de r + 1 até t.

    Raises:
        EmptyWindow: se r não estiver em [t1, t - 1]
    """
    if not sub.chunks or not sub.t1 <= r < sub.t:
        raise EmptyWindow(f"Corte {r} deixa uma janela vazia")

    first = [c for c in sub.chunks if c.index <= r]
    second = [c for c in sub.chunks if c.index > r]
    return (
        np.concatenate([c.correct_pu for c in first]),
        np.concatenate([c.correct_pu for c in second]),
        np.concatenate([c.misclassified_pu for c in first]),
        np.concatenate([c.misclassified_pu for c in second]),
    )


def build_table_with_spec(
    spec: BucketSpec,
    uc_first: Sequence[float],
    uc_second: Sequence[float],
    n_misclassified_first: int,
    n_misclassified_second: int,
) -> ContingencyTable:
    """Tabela 2 x (K + 1) sobre uma partição já ajustada; última coluna = mal classificados"""
    row_first = bucketing_service.histogram(spec, uc_first)
    row_second = bucketing_service.histogram(spec, uc_second)
    return ContingencyTable(counts=[
        [*row_first.tolist(), int(n_misclassified_first)],
        [*row_second.tolist(), int(n_misclassified_second)],
    ])


def build_table(
    uc_first: Sequence[float],
    uc_second: Sequence[float],
    um_first: Sequence[float],
    um_second: Sequence[float],
    config: BucketingConfig,
) -> Tuple[ContingencyTable, BucketSpec]:
    """
    Monta a tabela de contingência PUDD.

    A partição é ajustada apenas sobre uC_first; as duas linhas usam a mesma
    partição, com o tamanho de uM de cada janela na última coluna.

    Raises:
        TooFewSamples: se uC_first estiver vazio
    """
    if len(uc_first) == 0:
        raise TooFewSamples("A primeira janela não tem amostras corretamente classificadas")
    spec = bucketing_service.fit(uc_first, config)
    table = build_table_with_spec(spec, uc_first, uc_second, len(um_first), len(um_second))
    return table, spec


def build_table_eikmeans(
    u_first: Sequence[float],
    u_second: Sequence[float],
    config: BucketingConfig,
) -> Tuple[ContingencyTable, BucketSpec]:
    """Ablação Ei-kMeans: bins sobre todos os PU-index da primeira janela, tabela 2 x K"""
    if len(u_first) == 0:
        raise TooFewSamples("A primeira janela está vazia")
    spec = bucketing_service.fit(u_first, config)
    if spec.k < 2:
        raise TooFewSamples("A partição colapsou em um único bin")
    counts = [
        bucketing_service.histogram(spec, u_first).tolist(),
        bucketing_service.histogram(spec, u_second).tolist(),
    ]
    return ContingencyTable(counts=counts), spec


def should_test(mode: SkipHeuristic, mean_first: float, mean_second: float) -> bool:
    if mode == SkipHeuristic.PAPER_TEXT:
        return mean_second > mean_first
    if mode == SkipHeuristic.PAPER_PSEUDOCODE:
        return mean_first >= mean_second
    return True


def score_counts(cut: int, counts: np.ndarray, dof: int) -> CutOutcome:
    """Aplica o Qui-quadrado a uma matriz de contagens; marginais nulas viram corte ignorado"""
    try:
        statistic, _ = pearson_statistic(counts)
    except ZeroMarginal:
        logger.warning("Tabela com marginal nula, corte ignorado", cut=cut, counts=counts.tolist())
        return CutOutcome(cut=cut, status=CutStatus.SKIPPED_ZERO_MARGINAL)
    return CutOutcome(
        cut=cut,
        status=CutStatus.TESTED,
        p_value=chi_square_p_value(statistic, dof),
        statistic=statistic,
        dof=dof,
        low_count_warning=has_low_counts(counts),
    )


def score_table(cut: int, table: ContingencyTable, dof: int) -> CutOutcome:
    return score_counts(cut, table.counts, dof)


def build_report(outcomes: List[CutOutcome], config: DetectorConfig, t: Optional[int]) -> DetectionReport:
    """Relatório dos cortes avaliados, com o valor crítico do melhor corte"""
    return DetectionReport.from_outcomes(
        outcomes,
        config.sigma,
        t=t,
        critical=lambda dof: chi_square_critical_value(dof, config.sigma),
    )


def _window_means(sub: SubStream) -> List[Tuple[float, float]]:
    """
    Médias de uM das duas janelas para cada corte.

    Somas por chunk via math.fsum, acumuladas chunk a chunk a partir de 0.0.
    Janela sem erros tem média 0.
    """
    sums = [math.fsum(c.misclassified_pu) for c in sub.chunks]
    counts = [int(c.misclassified_pu.size) for c in sub.chunks]
    means = []
    for split in range(1, len(sub.chunks)):
        first_sum = 0.0
        for s in sums[:split]:
            first_sum += s
        second_sum = 0.0
        for s in sums[split:]:
            second_sum += s
        first_n = sum(counts[:split])
        second_n = sum(counts[split:])
        means.append((
            first_sum / first_n if first_n else 0.0,
            second_sum / second_n if second_n else 0.0,
        ))
    return means


def evaluate_cut(sub: SubStream, r: int, means: Tuple[float, float], config: DetectorConfig) -> CutOutcome:
    """Resultado de um único corte: heurística, tabela e teste"""
    if not should_test(config.skip_heuristic, *means):
        return CutOutcome(cut=r, status=CutStatus.SKIPPED_HEURISTIC)

    uc_first, uc_second, um_first, um_second = split_at_cut(sub, r)
    try:
        if config.table_mode == TableMode.EIKMEANS:
            table, spec = build_table_eikmeans(
                np.concatenate([uc_first, um_first]),
                np.concatenate([uc_second, um_second]),
                config.bucketing,
            )
            dof = spec.k - 1
        else:
            table, spec = build_table(uc_first, uc_second, um_first, um_second, config.bucketing)
            dof = spec.k
    except TooFewSamples as e:
        logger.debug("Corte ignorado por falta de amostras", cut=r, reason=str(e))
        return CutOutcome(cut=r, status=CutStatus.SKIPPED_TOO_FEW_SAMPLES)

    outcome = score_table(r, table, dof)
    logger.debug("Corte avaliado", cut=r, status=outcome.status.value, p_value=outcome.p_value, k=spec.k)
    return outcome


def detect(sub: SubStream, config: DetectorConfig) -> DetectionReport:
    """
    PUDD em lote: explora todos os cortes r em [t1, t - 1] do substream.

    Cortes degenerados são marcados no relatório em vez de gerar erro. O
    alarme dispara quando o menor p-valor entre os cortes testados fica
    abaixo de sigma.
    """
    if len(sub) < 2:
        return DetectionReport(t=sub.t if sub.chunks else None)

    cuts = [c.index for c in sub.chunks[:-1]]
    means = _window_means(sub)

    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            outcomes = list(pool.map(lambda args: evaluate_cut(sub, args[0], args[1], config), zip(cuts, means)))
    else:
        outcomes = [evaluate_cut(sub, r, m, config) for r, m in zip(cuts, means)]

    report = build_report(outcomes, config, sub.t)
    low_counts = [o.cut for o in report.per_cut if o.low_count_warning]
    if low_counts:
        logger.warning("Células com contagem observada abaixo de 50", t=sub.t, cuts=low_counts)
    if report.alarm:
        logger.info("Drift detectado", t=sub.t, cut=report.chosen_cut, p_value=report.min_p)
    return report


def on_alarm(sub: SubStream, chosen_cut: int) -> SubStream:
    """Descarta os dados antigos: mantém apenas os chunks posteriores ao corte escolhido"""
    return SubStream(chunks=[c for c in sub.chunks if c.index > chosen_cut])


def theorem_histogram(window: Sequence[PuSample], partition: Sequence[float]) -> List[int]:
    """
    Histograma da construção teórica: bin 0 reúne todas as amostras corretas e
    os demais bins particionam os PU-index mal classificados pelas bordas dadas.
    """
    edges = np.asarray(partition, dtype=np.float64)
    n_bins = edges.size - 1
    counts = [0] * (n_bins + 1)
    for sample in window:
        if sample.correct:
            counts[0] += 1
        else:
            b = int(np.searchsorted(edges[1:-1], sample.pu, side="right"))
            counts[1 + b] += 1
    return counts


def error_rate_and_std(window: Sequence[PuSample]) -> Tuple[Fraction, Fraction]:
    """Taxa de erro exata e variância ē - ē² (o desvio padrão é a raiz dela)"""
    if not window:
        raise EmptyWindow("Janela sem amostras")
    rate = Fraction(sum(1 for s in window if not s.correct), len(window))
    return rate, rate - rate * rate


def theorem1_check(window1: Sequence[PuSample], window2: Sequence[PuSample], partition: Sequence[float]) -> bool:
    """
    Verifica a implicação: proporções iguais no histograma teórico implicam
    taxas de erro e desvios padrão iguais. Comparações exatas em racionais.
    """
    h1 = theorem_histogram(window1, partition)
    h2 = theorem_histogram(window2, partition)
    n1, n2 = sum(h1), sum(h2)
    if n1 == 0 or n2 == 0:
        raise EmptyWindow("Janela sem amostras")

    proportions_equal = all(Fraction(a, n1) == Fraction(b, n2) for a, b in zip(h1, h2))
    rate1, var1 = error_rate_and_std(window1)
    rate2, var2 = error_rate_and_std(window2)
    return (not proportions_equal) or (rate1 == rate2 and var1 == var2)
