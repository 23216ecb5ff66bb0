import os
from typing import Iterable, Iterator, List, Tuple

import numpy as np
import pandas as pd

from models.detection_models import Chunk, PuSample
from models.stream_models import DriftSchedule, LabeledChunk, StreamKind, StreamSpec
from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger("stream-service")


def gen_sea(seed: int, schedule: DriftSchedule, noise_pct: int = 0) -> Iterator[LabeledChunk]:
    """
    SEA: 3 features uniformes em [0, 10], y = 1 se x1 + x2 <= θ.

    θ percorre concept_sequence a cada period_chunks; noise_pct% dos rótulos
    são invertidos uniformemente.
    """
    rng = np.random.default_rng(seed)
    for i in range(schedule.n_chunks):
        X = rng.uniform(0.0, 10.0, size=(schedule.chunk_size, 3))
        theta = schedule.concept_at(i)
        y = (X[:, 0] + X[:, 1] <= theta).astype(np.int64)
        if noise_pct:
            flip = rng.random(schedule.chunk_size) < noise_pct / 100.0
            y[flip] = 1 - y[flip]
        yield LabeledChunk(index=i, X=X, y=y, concept=schedule.concept_index_at(i))


def gen_sine(seed: int, schedule: DriftSchedule) -> Iterator[LabeledChunk]:
    """SINE: 2 features em [0, 1]; conceito A: y = x2 < sin(x1); conceito B invertido"""
    rng = np.random.default_rng(seed)
    for i in range(schedule.n_chunks):
        X = rng.uniform(0.0, 1.0, size=(schedule.chunk_size, 2))
        y = (X[:, 1] < np.sin(X[:, 0])).astype(np.int64)
        if schedule.concept_at(i):
            y = 1 - y
        yield LabeledChunk(index=i, X=X, y=y, concept=schedule.concept_index_at(i))


def gen_mixed(seed: int, schedule: DriftSchedule) -> Iterator[LabeledChunk]:
    """
    MIXED: features [v, w, x3, x4] com v, w booleanos e x3, x4 uniformes em [0, 1].

    Conceito A: y = 1 se ao menos duas de {v, w, x4 < 0.5 + 0.3 sin(3π x3)}
    valem; conceito B invertido.
    """
    rng = np.random.default_rng(seed)
    for i in range(schedule.n_chunks):
        booleans = rng.random((schedule.chunk_size, 2)) < 0.5
        numeric = rng.uniform(0.0, 1.0, size=(schedule.chunk_size, 2))
        below_curve = numeric[:, 1] < 0.5 + 0.3 * np.sin(3.0 * np.pi * numeric[:, 0])
        votes = booleans[:, 0].astype(int) + booleans[:, 1].astype(int) + below_curve.astype(int)
        y = (votes >= 2).astype(np.int64)
        if schedule.concept_at(i):
            y = 1 - y
        X = np.column_stack([booleans.astype(np.float64), numeric])
        yield LabeledChunk(index=i, X=X, y=y, concept=schedule.concept_index_at(i))


def _equal_error_window(rng: np.random.Generator, n: int, concept: int) -> Tuple[np.ndarray, np.ndarray]:
    """Metade mal classificada em (0.9, 1] ou (0.8, 0.9]; metade correta em [0, 0.1) ou (0.1, 0.2]"""
    half = n // 2
    u_wrong = rng.random(half)
    u_right = rng.random(n - half)
    if concept == 0:
        pu = np.concatenate([1.0 - 0.1 * u_wrong, 0.1 * u_right])
    else:
        pu = np.concatenate([0.9 - 0.1 * u_wrong, 0.2 - 0.1 * u_right])
    correct = np.concatenate([np.zeros(half, dtype=bool), np.ones(n - half, dtype=bool)])
    order = rng.permutation(n)
    return pu[order], correct[order]


def gen_equal_error_counterexample(seed: int, n_per_window: int) -> Tuple[List[PuSample], List[PuSample]]:
    """
    Par de janelas com taxa de erro exatamente 0.5 e desvio padrão 0.5, mas
    com suportes de PU-index disjuntos.

    Raises:
        ConfigError: se n_per_window for ímpar ou menor que 2
    """
    if n_per_window < 2 or n_per_window % 2:
        raise ConfigError("n_per_window deve ser par e >= 2")
    rng = np.random.default_rng(seed)
    windows = []
    for concept in (0, 1):
        pu, correct = _equal_error_window(rng, n_per_window, concept)
        windows.append([PuSample(pu=float(p), correct=bool(c)) for p, c in zip(pu, correct)])
    return windows[0], windows[1]


def gen_equal_error_stream(seed: int, schedule: DriftSchedule) -> Iterator[Tuple[Chunk, int]]:
    """Stream de PU-index que alterna entre as duas distribuições do contraexemplo"""
    if schedule.chunk_size % 2:
        raise ConfigError("chunk_size deve ser par no stream equal_error")
    rng = np.random.default_rng(seed)
    for i in range(schedule.n_chunks):
        concept = int(schedule.concept_at(i)) % 2
        pu, correct = _equal_error_window(rng, schedule.chunk_size, concept)
        yield Chunk(index=i, pu=pu, correct=correct), schedule.concept_index_at(i)


def make_stream(spec: StreamSpec) -> Iterator[LabeledChunk]:
    """Gerador rotulado correspondente ao StreamSpec"""
    schedule = spec.schedule()
    if spec.kind == StreamKind.SEA:
        return gen_sea(spec.seed, schedule, spec.noise_pct)
    if spec.kind == StreamKind.SINE:
        return gen_sine(spec.seed, schedule)
    if spec.kind == StreamKind.MIXED:
        return gen_mixed(spec.seed, schedule)
    raise ConfigError(f"O stream {spec.kind.value} não produz instâncias rotuladas")


def stream_to_frame(chunks: Iterable[LabeledChunk]) -> pd.DataFrame:
    """Uma instância por linha: chunk, x1..xd e o rótulo y na última coluna"""
    frames = []
    for chunk in chunks:
        frame = pd.DataFrame(chunk.X, columns=[f"x{j + 1}" for j in range(chunk.X.shape[1])])
        frame.insert(0, "chunk", chunk.index)
        frame["y"] = chunk.y
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["chunk", "y"])
    return pd.concat(frames, ignore_index=True)


def pu_stream_to_frame(chunks: Iterable[Tuple[Chunk, int]]) -> pd.DataFrame:
    frames = [
        pd.DataFrame({"chunk": chunk.index, "pu": chunk.pu, "correct": chunk.correct.astype(int)})
        for chunk, _ in chunks
    ]
    if not frames:
        return pd.DataFrame(columns=["chunk", "pu", "correct"])
    return pd.concat(frames, ignore_index=True)


def export_csv(spec: StreamSpec, path: str) -> str:
    """Exporta o stream completo para CSV com cabeçalho"""
    if spec.kind == StreamKind.EQUAL_ERROR:
        frame = pu_stream_to_frame(gen_equal_error_stream(spec.seed, spec.schedule()))
    else:
        frame = stream_to_frame(make_stream(spec))

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info("Stream exportado", kind=spec.kind.value, seed=spec.seed, rows=len(frame), path=path)
    return path
