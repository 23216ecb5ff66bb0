import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from models.detection_models import (
    BenchResult, BucketSpec, Chunk, CutOutcome, CutStatus,
    DetectionReport, DetectorConfig, PuSample, SubStream, TableMode,
)
from services import bucketing_service
from services.detector_service import build_report, detect, on_alarm, score_counts, should_test
from utils.errors import OutOfRange, TooFewSamples
from utils.logger import get_logger

logger = get_logger("incremental-service")

# Tamanho mínimo do stream para o benchmark
MIN_BENCH_INSTANCES = 1000


@dataclass
class CutState:
    """
    Estado de um corte vivo: somas de uM das duas janelas e, a partir do
    primeiro teste, a partição congelada com a tabela 2 x (K + 1).
    """
    cut: int
    first_sum: float
    first_count: int
    second_sum: float = 0.0
    second_count: int = 0
    fitted: bool = False  # Partição já tentada; spec None = amostras insuficientes
    spec: Optional[BucketSpec] = None
    counts: Optional[np.ndarray] = None
    edges: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def means(self):
        return (
            self.first_sum / self.first_count if self.first_count else 0.0,
            self.second_sum / self.second_count if self.second_count else 0.0,
        )


class OnlineDetector:
    """
    PUDD incremental. Um novo corte nasce a cada fronteira de segmento; a
    partição dele é ajustada sobre o prefixo t1..r na primeira vez que a
    heurística deixa o corte ser testado, e daí em diante cada amostra só
    incrementa a linha da segunda janela.

    Segmentos têm o tamanho do chunk por padrão, ou uma instância quando
    per_instance_cuts está ativo. O alarme só é avaliado nas fronteiras.
    """

    def __init__(self, config: DetectorConfig, chunk_size: int, start_index: int = 0):
        if chunk_size < 1:
            raise ValueError("chunk_size deve ser positivo")
        self.config = config
        self.chunk_size = chunk_size
        self.segment_size = 1 if config.per_instance_cuts else chunk_size
        self.t1 = start_index
        self.segments: List[Chunk] = []
        self.cuts: List[CutState] = []
        self._buffer_pu: List[np.ndarray] = []
        self._buffer_correct: List[np.ndarray] = []
        self._buffered = 0
        self._fit_values: List[np.ndarray] = []
        self._prefix_sum = 0.0
        self._prefix_count = 0

    @property
    def t(self) -> Optional[int]:
        return self.segments[-1].index if self.segments else None

    @property
    def next_index(self) -> int:
        return self.t + 1 if self.segments else self.t1

    @property
    def eikmeans(self) -> bool:
        return self.config.table_mode == TableMode.EIKMEANS

    def observe(self, sample: PuSample) -> DetectionReport:
        """Ingere uma amostra; retorna relatório avaliado apenas ao fechar um segmento"""
        reports = self._ingest(np.array([sample.pu]), np.array([sample.correct]), evaluate=True)
        if reports:
            return reports[0]
        return DetectionReport(t=self.t, evaluated=False)

    def observe_chunk(self, pu: Sequence[float], correct: Sequence[bool]) -> List[DetectionReport]:
        """
        Ingestão vetorizada, equivalente a observe amostra a amostra.

        Returns:
            Relatórios das fronteiras de segmento atravessadas, em ordem
        """
        pu = np.asarray(pu, dtype=np.float64).ravel()
        correct = np.asarray(correct, dtype=bool).ravel()
        if pu.shape != correct.shape:
            raise ValueError("pu e correct devem ter o mesmo tamanho")
        if pu.size and (np.isnan(pu).any() or pu.min() < 0.0 or pu.max() > 1.0):
            raise OutOfRange("PU-index deve estar em [0, 1]")
        return self._ingest(pu, correct, evaluate=True)

    def _ingest(self, pu: np.ndarray, correct: np.ndarray, evaluate: bool) -> List[DetectionReport]:
        reports = []
        start = 0
        while start < pu.size:
            take = min(self.segment_size - self._buffered, pu.size - start)
            piece_pu = pu[start:start + take]
            piece_correct = correct[start:start + take]
            self._apply_delta(piece_pu, piece_correct)
            self._buffer_pu.append(piece_pu)
            self._buffer_correct.append(piece_correct)
            self._buffered += take
            start += take
            if self._buffered == self.segment_size:
                self._close_segment()
                if evaluate:
                    reports.append(self._evaluate())
        return reports

    def _apply_delta(self, pu: np.ndarray, correct: np.ndarray) -> None:
        """ΔT: cada amostra incrementa uma célula da linha 2 de cada corte com partição"""
        n_misclassified = int((~correct).sum())
        binned = pu if self.eikmeans else pu[correct]
        for state in self.cuts:
            state.second_count += n_misclassified
            if state.counts is None:
                continue
            k = state.spec.k
            if binned.size:
                bins = np.searchsorted(state.edges, binned, side="right")
                state.counts[1, :k] += np.bincount(bins, minlength=k)
            if not self.eikmeans:
                state.counts[1, k] += n_misclassified

    def _close_segment(self) -> None:
        segment = Chunk(
            index=self.next_index,
            pu=np.concatenate(self._buffer_pu),
            correct=np.concatenate(self._buffer_correct),
        )
        self._buffer_pu, self._buffer_correct, self._buffered = [], [], 0

        misclassified = segment.misclassified_pu
        segment_sum = math.fsum(misclassified)
        for state in self.cuts:
            state.second_sum += segment_sum

        self.segments.append(segment)
        self._prefix_sum += segment_sum
        self._prefix_count += int(misclassified.size)
        self._fit_values.append(segment.pu if self.eikmeans else segment.correct_pu)
        self.cuts.append(CutState(cut=segment.index, first_sum=self._prefix_sum, first_count=self._prefix_count))

        cap = self.config.max_live_cuts
        if cap is not None and len(self.cuts) > cap:
            dropped = len(self.cuts) - cap
            self.cuts = self.cuts[dropped:]
            logger.debug("Cortes antigos descartados pelo limite", dropped=dropped, cap=cap)

    def _fit_cut(self, state: CutState) -> None:
        """Partição sobre o prefixo t1..r e tabela recalculada por completo, uma única vez por corte"""
        state.fitted = True
        split = state.cut - self.segments[0].index + 1
        first = np.concatenate(self._fit_values[:split])
        try:
            if first.size == 0:
                raise TooFewSamples("Prefixo sem amostras para o bucketing")
            spec = bucketing_service.fit(first, self.config.bucketing)
            if self.eikmeans and spec.k < 2:
                raise TooFewSamples("A partição colapsou em um único bin")
        except TooFewSamples as e:
            logger.debug("Corte sem partição", cut=state.cut, reason=str(e))
            return

        k = spec.k
        width = k if self.eikmeans else k + 1
        counts = np.zeros((2, width), dtype=np.int64)
        counts[0, :k] = bucketing_service.histogram(spec, first)
        if split < len(self._fit_values):
            counts[1, :k] = bucketing_service.histogram(spec, np.concatenate(self._fit_values[split:]))
        if not self.eikmeans:
            counts[0, k] = state.first_count
            counts[1, k] = state.second_count

        state.spec = spec
        state.counts = counts
        state.edges = np.asarray(spec.boundaries[1:-1], dtype=np.float64)

    def _score(self, state: CutState) -> CutOutcome:
        if not should_test(self.config.skip_heuristic, *state.means):
            return CutOutcome(cut=state.cut, status=CutStatus.SKIPPED_HEURISTIC)
        if not state.fitted:
            self._fit_cut(state)
        if state.spec is None:
            return CutOutcome(cut=state.cut, status=CutStatus.SKIPPED_TOO_FEW_SAMPLES)
        dof = state.spec.k - 1 if self.eikmeans else state.spec.k
        return score_counts(state.cut, state.counts, dof)

    def _evaluate(self) -> DetectionReport:
        # O corte mais novo (r = t) ainda não tem segunda janela
        live = self.cuts[:-1]
        if self.config.max_workers > 1 and len(live) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
                outcomes = list(pool.map(self._score, live))
        else:
            outcomes = [self._score(state) for state in live]

        report = build_report(outcomes, self.config, self.t)
        if report.alarm:
            logger.info("Drift detectado (incremental)", t=self.t, cut=report.chosen_cut, p_value=report.min_p)
        return report


def on_alarm_online(det: OnlineDetector, chosen_cut: int) -> OnlineDetector:
    """
    Descarta segmentos até chosen_cut e reconstrói o detector a partir do
    sufixo sobrevivente (partições e tabelas recalculadas para o novo t1).
    """
    survivors = [s for s in det.segments if s.index > chosen_cut]
    fresh = OnlineDetector(det.config, det.chunk_size, start_index=chosen_cut + 1)
    for segment in survivors:
        fresh._ingest(segment.pu, segment.correct, evaluate=False)
    if det._buffered:
        fresh._ingest(np.concatenate(det._buffer_pu), np.concatenate(det._buffer_correct), evaluate=False)
    logger.debug("Detector reiniciado após alarme", t1=fresh.t1, live_cuts=len(fresh.cuts))
    return fresh


def bench_incremental_vs_batch(
    stream: Sequence[PuSample],
    config: DetectorConfig,
    chunk_size: int = 100,
) -> BenchResult:
    """
    Roda os modos batch e incremental sobre o mesmo stream de PU-index e
    compara custo por instância e sequência de alarmes.

    Raises:
        TooFewSamples: se o stream tiver menos de 1000 instâncias
    """
    if len(stream) < MIN_BENCH_INSTANCES:
        raise TooFewSamples(f"O benchmark precisa de pelo menos {MIN_BENCH_INSTANCES} instâncias")

    config = config.model_copy(update={"per_instance_cuts": False, "max_live_cuts": None})
    pu = np.array([s.pu for s in stream], dtype=np.float64)
    correct = np.array([s.correct for s in stream], dtype=bool)
    n_chunks = pu.size // chunk_size
    chunks = [
        Chunk(index=i, pu=pu[i * chunk_size:(i + 1) * chunk_size],
              correct=correct[i * chunk_size:(i + 1) * chunk_size])
        for i in range(n_chunks)
    ]

    started = time.perf_counter()
    batch_alarms = []
    sub = SubStream()
    for chunk in chunks:
        sub = sub.append(chunk)
        report = detect(sub, config)
        if report.alarm:
            batch_alarms.append(chunk.index)
            sub = on_alarm(sub, report.chosen_cut)
    batch_seconds = time.perf_counter() - started

    started = time.perf_counter()
    incremental_alarms = []
    det = OnlineDetector(config, chunk_size)
    for chunk in chunks:
        for report in det.observe_chunk(chunk.pu, chunk.correct):
            if report.alarm:
                incremental_alarms.append(report.t)
                det = on_alarm_online(det, report.chosen_cut)
    incremental_seconds = time.perf_counter() - started

    n_instances = n_chunks * chunk_size
    result = BenchResult(
        n_instances=n_instances,
        chunk_size=chunk_size,
        batch_seconds=batch_seconds,
        incremental_seconds=incremental_seconds,
        batch_per_instance_us=batch_seconds / n_instances * 1e6,
        incremental_per_instance_us=incremental_seconds / n_instances * 1e6,
        speedup=batch_seconds / incremental_seconds if incremental_seconds > 0 else float("inf"),
        alarms_equal=batch_alarms == incremental_alarms,
        batch_alarms=batch_alarms,
        incremental_alarms=incremental_alarms,
    )
    logger.info(
        "Benchmark concluído",
        n=n_instances,
        batch_s=round(batch_seconds, 4),
        incremental_s=round(incremental_seconds, 4),
        alarms_equal=result.alarms_equal,
    )
    return result
