from enum import Enum
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StreamKind(str, Enum):
    SEA = "sea"
    SINE = "sine"
    MIXED = "mixed"
    EQUAL_ERROR = "equal_error"  # Stream de PU-index sem classificador


# Sequências de conceitos padrão por gerador
DEFAULT_CONCEPTS = {
    StreamKind.SEA: [8.0, 9.0, 7.0, 9.5],   # Limiar θ de x1 + x2
    StreamKind.SINE: [0.0, 1.0],            # 0 = conceito A, 1 = invertido
    StreamKind.MIXED: [0.0, 1.0],
    StreamKind.EQUAL_ERROR: [0.0, 1.0],     # Distribuição da janela 1 ou 2
}

# Número de features por gerador
N_FEATURES = {
    StreamKind.SEA: 3,
    StreamKind.SINE: 2,
    StreamKind.MIXED: 4,
}


class DriftSchedule(BaseModel):
    """Cronograma de drift: o conceito muda a cada period_chunks chunks"""
    model_config = ConfigDict(frozen=True)

    period_chunks: int = Field(default=10, ge=1)
    concept_sequence: List[float] = Field(min_length=1)
    chunk_size: int = Field(default=1000, ge=1)
    n_chunks: int = Field(default=100, ge=1)

    def concept_index_at(self, chunk_index: int) -> int:
        return (chunk_index // self.period_chunks) % len(self.concept_sequence)

    def concept_at(self, chunk_index: int) -> float:
        return self.concept_sequence[self.concept_index_at(chunk_index)]

    @property
    def drift_chunks(self) -> List[int]:
        """Chunks em que a regra de rotulagem muda (sempre múltiplos de period_chunks)"""
        return [
            i for i in range(1, self.n_chunks)
            if self.concept_at(i) != self.concept_at(i - 1)
        ]


class LabeledChunk(BaseModel):
    """Chunk rotulado produzido por um gerador; cada linha (X[i], y[i]) é uma instância"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int = Field(ge=0)
    X: np.ndarray
    y: np.ndarray
    concept: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X deve ser (n, d) e y deve ter n rótulos")
        return self


class StreamSpec(BaseModel):
    """Especificação de um stream sintético: gerador, semente e cronograma"""
    model_config = ConfigDict(frozen=True)

    kind: StreamKind = StreamKind.SEA
    seed: int = 0
    noise_pct: Literal[0, 10, 20] = 0
    period_chunks: int = Field(default=10, ge=1)
    chunk_size: int = Field(default=1000, ge=2)
    n_chunks: int = Field(default=100, ge=2)
    concept_sequence: Optional[List[float]] = None
    stationary: bool = False  # Mantém apenas o primeiro conceito

    @field_validator("concept_sequence")
    @classmethod
    def _non_empty(cls, value):
        if value is not None and len(value) == 0:
            raise ValueError("concept_sequence não pode ser vazia")
        return value

    @model_validator(mode="after")
    def _check_equal_error(self):
        if self.kind == StreamKind.EQUAL_ERROR and self.chunk_size % 2:
            raise ValueError("O stream equal_error exige chunk_size par")
        return self

    def schedule(self) -> DriftSchedule:
        concepts = list(self.concept_sequence or DEFAULT_CONCEPTS[self.kind])
        if self.stationary:
            concepts = concepts[:1]
        return DriftSchedule(
            period_chunks=self.period_chunks,
            concept_sequence=concepts,
            chunk_size=self.chunk_size,
            n_chunks=self.n_chunks,
        )
