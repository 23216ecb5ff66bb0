from bisect import bisect_right
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from utils.errors import EmptyWindow, OutOfRange

class PuSample(BaseModel):
    """Um evento de predição: PU-index e se a classificação foi correta"""
    model_config = ConfigDict(frozen=True)

    pu: float = Field(ge=0.0, le=1.0)
    correct: bool

class Chunk(BaseModel):
    """Bloco de M amostras consecutivas do stream, guardado como arrays numpy"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int = Field(ge=0)
    pu: np.ndarray
    correct: np.ndarray

    @field_validator("pu", mode="before")
    @classmethod
    def _coerce_pu(cls, value):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("pu deve ser um vetor unidimensional")
        if not np.isfinite(arr).all():
            raise OutOfRange("PU-index deve ser finito")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise OutOfRange("PU-index deve estar em [0, 1]")
        return arr

    @field_validator("correct", mode="before")
    @classmethod
    def _coerce_correct(cls, value):
        return np.asarray(value, dtype=bool)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.pu.size == 0:
            raise ValueError("Um chunk precisa de pelo menos uma amostra")
        if self.pu.shape != self.correct.shape:
            raise ValueError("pu e correct devem ter o mesmo tamanho")
        return self

    @classmethod
    def from_samples(cls, index: int, samples: List[PuSample]) -> "Chunk":
        return cls(
            index=index,
            pu=[s.pu for s in samples],
            correct=[s.correct for s in samples],
        )

    @property
    def samples(self) -> List[PuSample]:
        return [PuSample(pu=float(p), correct=bool(c)) for p, c in zip(self.pu, self.correct)]

    @property
    def size(self) -> int:
        return int(self.pu.size)

    @property
    def misclassified_pu(self) -> np.ndarray:
        return self.pu[~self.correct]

    @property
    def correct_pu(self) -> np.ndarray:
        return self.pu[self.correct]

class SubStream(BaseModel):
    """Chunks acumulados desde o último alarme (t1..t)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    chunks: List[Chunk] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_contiguous(self):
        for prev, cur in zip(self.chunks, self.chunks[1:]):
            if cur.index != prev.index + 1:
                raise ValueError(
                    f"Índices de chunk não contíguos: {prev.index} seguido de {cur.index}"
                )
        return self

    @property
    def t1(self) -> int:
        if not self.chunks:
            raise EmptyWindow("Substream vazio")
        return self.chunks[0].index

    @property
    def t(self) -> int:
        if not self.chunks:
            raise EmptyWindow("Substream vazio")
        return self.chunks[-1].index

    def __len__(self) -> int:
        return len(self.chunks)

    def append(self, chunk: Chunk) -> "SubStream":
        return SubStream(chunks=[*self.chunks, chunk])

class BucketingConfig(BaseModel):
    """Hiperparâmetros do Adaptive PU-index Bucketing"""
    model_config = ConfigDict(frozen=True)

    k_init: int = Field(default=5, gt=0)
    theta: float = Field(default=2.0, gt=0)
    min_expected: float = Field(default=5.0, gt=0)
    max_amplify_rounds: int = Field(default=20, gt=0)

class BucketSpec(BaseModel):
    """Partição 1-D de [0, 1] em k bins; boundaries inclui as bordas 0 e 1"""
    model_config = ConfigDict(frozen=True)

    centroids: Tuple[float, ...]
    boundaries: Tuple[float, ...]

    _interior: List[float] = PrivateAttr(default_factory=list)

    @model_validator(mode="after")
    def _check_partition(self):
        if len(self.centroids) < 1:
            raise ValueError("BucketSpec precisa de pelo menos um bin")
        if len(self.boundaries) != len(self.centroids) + 1:
            raise ValueError("boundaries deve ter k + 1 bordas")
        if self.boundaries[0] != 0.0 or self.boundaries[-1] != 1.0:
            raise ValueError("As bordas externas devem ser 0 e 1")
        if any(b >= a for a, b in zip(self.boundaries[1:], self.boundaries)):
            raise ValueError("boundaries deve ser estritamente crescente")
        if any(b >= a for a, b in zip(self.centroids[1:], self.centroids)):
            raise ValueError("centroids deve ser estritamente crescente")
        return self

    def model_post_init(self, __context) -> None:
        self._interior = list(self.boundaries[1:-1])

    @property
    def k(self) -> int:
        return len(self.centroids)

    def bin_of(self, value: float) -> int:
        """Bin de um valor já validado; bins fechados à esquerda, último fechado à direita"""
        return bisect_right(self._interior, value)

    def bins_of(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self._interior, dtype=np.float64), values, side="right")

class ContingencyTable(BaseModel):
    """Contagens observadas: linha = janela, coluna = bucket (última = mal classificados)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: np.ndarray

    @field_validator("counts", mode="before")
    @classmethod
    def _coerce_counts(cls, value):
        arr = np.asarray(value)
        if arr.ndim != 2:
            raise ValueError("A tabela deve ser uma matriz")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("A tabela deve conter contagens inteiras")
        arr = arr.astype(np.int64)
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError("A tabela precisa de pelo menos 2 linhas e 2 colunas")
        if (arr < 0).any():
            raise ValueError("Contagens negativas não são permitidas")
        return arr

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())

class ChiSquareResult(BaseModel):
    """Resultado do teste Qui-quadrado de Pearson"""
    statistic: float = Field(ge=0.0)
    dof: int = Field(ge=1)
    p_value: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    min_expected: Optional[float] = None
    low_count_warning: bool = False  # Alguma contagem observada abaixo de 50

class SkipHeuristic(str, Enum):
    PAPER_PSEUDOCODE = "paper_pseudocode"  # Testa quando Mean(uM_1) >= Mean(uM_2)
    PAPER_TEXT = "paper_text"              # Testa quando Mean(uM_2) > Mean(uM_1)
    OFF = "off"

class TableMode(str, Enum):
    PUDD = "pudd"          # K bins de corretos + coluna de mal classificados
    EIKMEANS = "eikmeans"  # Ablação: bins sobre todos os PU-index, sem coluna extra

class DetectorConfig(BaseModel):
    """Configuração do detector PUDD (batch e incremental)"""
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(default=1e-5, gt=0.0, lt=1.0)
    bucketing: BucketingConfig = Field(default_factory=BucketingConfig)
    skip_heuristic: SkipHeuristic = SkipHeuristic.PAPER_TEXT
    table_mode: TableMode = TableMode.PUDD
    max_workers: int = Field(default=1, ge=1)  # Avaliação paralela de cortes
    per_instance_cuts: bool = False  # Modo incremental: um corte por instância
    max_live_cuts: Optional[int] = Field(default=None, ge=1)

class CutStatus(str, Enum):
    TESTED = "tested"
    SKIPPED_HEURISTIC = "skipped_heuristic"
    SKIPPED_TOO_FEW_SAMPLES = "skipped_too_few_samples"
    SKIPPED_ZERO_MARGINAL = "skipped_zero_marginal"

class CutOutcome(BaseModel):
    """Resultado de um ponto de corte r"""
    cut: int
    status: CutStatus
    p_value: Optional[float] = None
    statistic: Optional[float] = None
    dof: Optional[int] = None
    low_count_warning: bool = False

    @property
    def tested(self) -> bool:
        return self.status == CutStatus.TESTED

class DetectionReport(BaseModel):
    """Relatório de uma rodada de detecção sobre o substream"""
    t: Optional[int] = None
    evaluated: bool = True
    per_cut: List[CutOutcome] = Field(default_factory=list)
    min_p: Optional[float] = None
    alarm: bool = False
    chosen_cut: Optional[int] = None
    critical_value: Optional[float] = None  # Estatística mínima para alarme no dof do melhor corte

    @classmethod
    def from_outcomes(
        cls,
        outcomes: List[CutOutcome],
        sigma: float,
        t: Optional[int] = None,
        critical: Optional[Callable[[int], float]] = None,
    ) -> "DetectionReport":
        outcomes = sorted(outcomes, key=lambda o: o.cut)
        tested = [o for o in outcomes if o.tested]
        if not tested:
            return cls(t=t, per_cut=outcomes)
        best = min(tested, key=lambda o: (o.p_value, o.cut))
        alarm = best.p_value < sigma
        return cls(
            t=t,
            per_cut=outcomes,
            min_p=best.p_value,
            alarm=alarm,
            chosen_cut=best.cut if alarm else None,
            critical_value=critical(best.dof) if critical else None,
        )

class BenchResult(BaseModel):
    """Comparação de custo entre o detector incremental e o batch"""
    n_instances: int
    chunk_size: int
    batch_seconds: float
    incremental_seconds: float
    batch_per_instance_us: float
    incremental_per_instance_us: float
    speedup: float
    alarms_equal: bool
    batch_alarms: List[int]
    incremental_alarms: List[int]

class PropertyReport(BaseModel):
    """Resultado de uma suíte de propriedades (proptest)"""
    name: str
    cases: int
    failures: int = 0
    details: dict = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

class ChunkPayload(BaseModel):
    """Chunk de PU-index recebido pela API"""
    index: int = Field(ge=0)
    pu: List[float] = Field(min_length=1)
    correct: List[bool] = Field(min_length=1)

    def to_chunk(self) -> Chunk:
        return Chunk(index=self.index, pu=self.pu, correct=self.correct)

class DetectRequest(BaseModel):
    chunks: List[ChunkPayload] = Field(min_length=1)
    config: DetectorConfig = Field(default_factory=DetectorConfig)
