import math
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from models.detection_models import BucketingConfig, DetectorConfig, SkipHeuristic, TableMode
from models.stream_models import StreamSpec


class DetectorKind(str, Enum):
    PUDD_BATCH = "pudd_batch"
    PUDD_INCREMENTAL = "pudd_incremental"
    DDM = "ddm"
    PH = "ph"
    NONE = "none"


class TrainingRegime(str, Enum):
    INCREMENTAL = "incremental"                      # Testa e depois treina em todo chunk
    TRAIN_ONCE_UNTIL_ALARM = "train_once_until_alarm"  # Retreina apenas após alarme


class DetectorSpec(BaseModel):
    """Detector avaliado no experimento e seus hiperparâmetros"""
    kind: DetectorKind = DetectorKind.PUDD_BATCH
    sigma: float = Field(default=1e-5, gt=0.0, lt=1.0)
    k: int = Field(default=5, gt=0)
    theta: float = Field(default=2.0, gt=0.0)
    min_expected: float = Field(default=5.0, gt=0.0)
    max_amplify_rounds: int = Field(default=20, gt=0)
    skip_heuristic: SkipHeuristic = SkipHeuristic.PAPER_TEXT
    table_mode: TableMode = TableMode.PUDD
    per_instance_cuts: bool = False
    max_workers: int = Field(default=1, ge=1)

    @property
    def is_pudd(self) -> bool:
        return self.kind in (DetectorKind.PUDD_BATCH, DetectorKind.PUDD_INCREMENTAL)

    @property
    def label(self) -> str:
        """Rótulo de linha: PUDD-x (σ = 1e-x), DDM, PH ou None"""
        if not self.is_pudd:
            return {DetectorKind.DDM: "DDM", DetectorKind.PH: "PH"}.get(self.kind, "None")
        exponent = -math.log10(self.sigma)
        if abs(exponent - round(exponent)) < 1e-9:
            name = f"PUDD-{int(round(exponent))}"
        else:
            name = f"PUDD(sigma={self.sigma:g})"
        if self.kind == DetectorKind.PUDD_INCREMENTAL:
            name += " inc"
        if self.table_mode == TableMode.EIKMEANS:
            name += " eikmeans"
        return name

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            sigma=self.sigma,
            bucketing=BucketingConfig(
                k_init=self.k,
                theta=self.theta,
                min_expected=self.min_expected,
                max_amplify_rounds=self.max_amplify_rounds,
            ),
            skip_heuristic=self.skip_heuristic,
            table_mode=self.table_mode,
            max_workers=self.max_workers,
            per_instance_cuts=self.per_instance_cuts,
        )


class ClassifierSpec(BaseModel):
    kind: Literal["gnb"] = "gnb"
    regime: TrainingRegime = TrainingRegime.INCREMENTAL


class ExperimentConfig(BaseModel):
    """Configuração completa de um experimento prequencial"""
    stream: StreamSpec = Field(default_factory=StreamSpec)
    detector: DetectorSpec = Field(default_factory=DetectorSpec)
    classifier: ClassifierSpec = Field(default_factory=ClassifierSpec)
    repetitions: int = Field(default=10, ge=1)
    output_path: Optional[str] = None
    max_workers: int = Field(default=1, ge=1)  # Repetições em paralelo

    @property
    def seeds(self) -> List[int]:
        return [self.stream.seed + r for r in range(self.repetitions)]


class RunMetrics(BaseModel):
    """Métricas de uma execução (uma semente)"""
    seed: int
    chunks: List[int]
    chunk_accuracy: List[float]
    chunk_sizes: List[int]
    overall_accuracy: float
    alarms: List[int] = Field(default_factory=list)
    drift_chunks: List[int] = Field(default_factory=list)
    delays: List[Optional[int]] = Field(default_factory=list)  # None = drift não detectado
    false_alarms: int = 0
    wall_ms: Dict[str, float] = Field(default_factory=dict)

    @property
    def detected(self) -> int:
        return sum(1 for d in self.delays if d is not None)


class ExperimentResult(BaseModel):
    """Execuções ordenadas por semente e agregados"""
    label: str
    config: ExperimentConfig
    runs: List[RunMetrics]
    mean_accuracy: float
    std_accuracy: float
    mean_delay: Optional[float] = None
    detection_rate: Optional[float] = None  # Drifts detectados / drifts injetados
    mean_false_alarms: float
    mean_alarms: float


class ComparisonRow(BaseModel):
    detector: str
    mean_accuracy: float
    mean_delay: Optional[float] = None
    detection_rate: Optional[float] = None
    false_alarms: float
    alarms: float
    reference_accuracy: Optional[float] = None  # Acurácia de referência em %, quando existe
    deviation: Optional[float] = None  # |acurácia - referência| em pontos percentuais
    within_band: Optional[bool] = None
