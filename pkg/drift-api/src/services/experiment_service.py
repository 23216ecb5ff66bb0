import asyncio
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd
from pydantic import ValidationError
from sklearn.metrics import accuracy_score

from config import settings
from models.detection_models import Chunk, DetectionReport, DetectorConfig, SubStream
from models.experiment_models import (
    ComparisonRow, DetectorKind, DetectorSpec, ExperimentConfig, ExperimentResult,
    RunMetrics, TrainingRegime,
)
from models.stream_models import N_FEATURES, StreamKind
from services.baseline_service import DDM, DetectorStatus, PageHinkley
from services.classifier_service import GaussianNaiveBayes, error_indicators, pu_indices
from services.detector_service import detect, on_alarm
from services.incremental_service import OnlineDetector, on_alarm_online
from services.stream_service import gen_equal_error_stream, make_stream
from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger("experiment-service")

# Sigmas da varredura PUDD-1/3/5
SIGMA_SWEEP = (1e-1, 1e-3, 1e-5)

# Acurácia de referência (%) do GNB em regime incremental e meia largura da faixa aceita
REFERENCE_ACCURACY = {
    (StreamKind.SEA, 0, "PUDD-5"): (94.85, 1.5),
    (StreamKind.SEA, 0, "DDM"): (93.97, 1.5),
    (StreamKind.SINE, 0, "PUDD-3"): (83.39, 2.0),
}


def settings_defaults() -> Dict[str, Any]:
    """Parâmetros padrão de experimento vindos das configurações do serviço"""
    return {
        "stream": {
            "chunk_size": settings.DEFAULT_CHUNK_SIZE,
            "n_chunks": settings.DEFAULT_N_CHUNKS,
            "period_chunks": settings.DEFAULT_PERIOD_CHUNKS,
        },
        "detector": {
            "sigma": settings.DEFAULT_SIGMA,
            "k": settings.DEFAULT_K,
            "theta": settings.DEFAULT_THETA,
            "min_expected": settings.DEFAULT_MIN_EXPECTED,
            "max_amplify_rounds": settings.DEFAULT_MAX_AMPLIFY_ROUNDS,
        },
        "classifier": {},
        "repetitions": settings.DEFAULT_REPETITIONS,
        "max_workers": settings.MAX_WORKERS,
    }


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Mescla recursiva; folhas None da sobrescrita nunca substituem valores"""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict):
            current = merged.get(key)
            merged[key] = _deep_merge(current if isinstance(current, dict) else {}, value)
        elif value is not None:
            merged[key] = value
    return merged


def build_config(*layers: Dict[str, Any]) -> ExperimentConfig:
    """
    Monta um ExperimentConfig a partir dos padrões do serviço e de camadas
    de sobrescrita (arquivo, flags); a última camada prevalece.

    Raises:
        ConfigError: se o resultado não for uma configuração válida
    """
    data = settings_defaults()
    for layer in layers:
        data = _deep_merge(data, layer or {})
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Configuração de experimento inválida: {e}") from e


def load_experiment_file(path: str) -> Dict[str, Any]:
    """
    Lê um arquivo TOML com tabelas [stream], [detector], [classifier] e [run].

    Raises:
        ConfigError: arquivo ausente ou TOML inválido
    """
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Arquivo de configuração não encontrado: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML inválido em {path}: {e}") from e

    unknown = set(raw) - {"stream", "detector", "classifier", "run"}
    if unknown:
        raise ConfigError(f"Seções desconhecidas: {sorted(unknown)}")
    data = {key: raw[key] for key in ("stream", "detector", "classifier") if key in raw}
    data.update(raw.get("run", {}))
    return data


def match_delays(alarms: Sequence[int], drift_chunks: Sequence[int], n_chunks: int) -> Tuple[List[Optional[int]], int]:
    """
    Atrasos por drift injetado e contagem de falsos alarmes.

    O primeiro alarme em [drift, próximo drift) detecta o drift; todos os
    demais alarmes (antes do primeiro drift ou repetidos na janela) são falsos.
    """
    delays: List[Optional[int]] = []
    matched = set()
    bounds = list(drift_chunks) + [n_chunks]
    for start, end in zip(bounds, bounds[1:]):
        hits = [a for a in alarms if start <= a < end]
        if hits:
            delays.append(hits[0] - start)
            matched.add(hits[0])
        else:
            delays.append(None)
    false_alarms = sum(1 for a in alarms if a not in matched)
    return delays, false_alarms


class _ErrorRateArm:
    """DDM ou Page-Hinkley por instância, alinhado por chunk"""

    def __init__(self, kind: DetectorKind):
        # Os detectores se reiniciam sozinhos após sinalizar drift
        self.detector = DDM() if kind == DetectorKind.DDM else PageHinkley()

    def observe(self, errors: np.ndarray) -> bool:
        drift = False
        for e in errors:
            if self.detector.update(int(e)) == DetectorStatus.DRIFT:
                drift = True
        return drift


class _PuddArm:
    """PUDD batch ou incremental recebendo os PU-index de cada chunk"""

    def __init__(self, spec: DetectorSpec, chunk_size: int):
        self.spec = spec
        self.config = spec.detector_config()
        self.chunk_size = chunk_size
        self.restart(0)

    def restart(self, start_index: int) -> None:
        self.sub = SubStream()
        self.online = OnlineDetector(self.config, self.chunk_size, start_index=start_index)

    def observe(self, chunk: Chunk) -> Optional[int]:
        """Retorna o corte escolhido em caso de alarme"""
        if self.spec.kind == DetectorKind.PUDD_INCREMENTAL:
            for report in self.online.observe_chunk(chunk.pu, chunk.correct):
                if report.alarm:
                    return report.chosen_cut
            return None
        self.sub = self.sub.append(chunk)
        report = detect(self.sub, self.config)
        return report.chosen_cut if report.alarm else None

    def discard(self, chosen_cut: int) -> None:
        if self.spec.kind == DetectorKind.PUDD_INCREMENTAL:
            self.online = on_alarm_online(self.online, chosen_cut)
        else:
            self.sub = on_alarm(self.sub, chosen_cut)


def _labeled_chunks(config: ExperimentConfig, seed: int) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    stream = config.stream.model_copy(update={"seed": seed})
    for chunk in make_stream(stream):
        yield chunk.index, chunk.X, chunk.y


def _predict_proba(model: GaussianNaiveBayes, X: np.ndarray) -> np.ndarray:
    if model.is_ready:
        return model.predict_proba(X)
    # Alguma classe ainda não apareceu: usa as frequências observadas
    prior = model.class_count_ / model.class_count_.sum()
    return np.tile(prior, (X.shape[0], 1))


def run_single(config: ExperimentConfig, seed: int) -> RunMetrics:
    """
    Uma execução prequencial (testa e depois treina) com a semente dada.

    Para streams rotulados o chunk 0 só treina o GNB. Cada chunk seguinte é
    predito, pontuado e entregue ao detector; em alarme o modelo é
    reiniciado e ajustado no chunk atual. No regime incremental, sem alarme,
    o modelo recebe partial_fit do chunk após o teste.
    """
    schedule = config.stream.schedule()
    detector = config.detector
    timings = {"predict": 0.0, "detect": 0.0, "train": 0.0}
    started = time.perf_counter()

    pudd = _PuddArm(detector, config.stream.chunk_size) if detector.is_pudd else None
    baseline = _ErrorRateArm(detector.kind) if detector.kind in (DetectorKind.DDM, DetectorKind.PH) else None

    chunks_seen, accuracies, sizes, alarms = [], [], [], []

    if config.stream.kind == StreamKind.EQUAL_ERROR:
        # Sem classificador: o PU-index já vem pronto e a acurácia é 1 - taxa de erro
        for chunk, _ in gen_equal_error_stream(seed, schedule):
            chunks_seen.append(chunk.index)
            accuracies.append(float(chunk.correct.mean()))
            sizes.append(chunk.size)

            t0 = time.perf_counter()
            alarm = False
            if pudd is not None:
                cut = pudd.observe(chunk)
                if cut is not None:
                    alarm = True
                    pudd.discard(cut)
            elif baseline is not None:
                alarm = baseline.observe(~chunk.correct)
            timings["detect"] += time.perf_counter() - t0
            if alarm:
                alarms.append(chunk.index)
    else:
        model = GaussianNaiveBayes(n_classes=2, n_features=N_FEATURES[config.stream.kind])
        for index, X, y in _labeled_chunks(config, seed):
            if index == 0:
                t0 = time.perf_counter()
                model.fit(X, y)
                timings["train"] += time.perf_counter() - t0
                if pudd is not None:
                    pudd.restart(1)
                continue

            t0 = time.perf_counter()
            proba = _predict_proba(model, X)
            errors = error_indicators(proba, y)
            pu = pu_indices(proba, y)
            chunks_seen.append(index)
            accuracies.append(float(accuracy_score(y, np.argmax(proba, axis=1))))
            sizes.append(int(y.size))
            timings["predict"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            alarm = False
            if pudd is not None:
                alarm = pudd.observe(Chunk(index=index, pu=pu, correct=errors == 0)) is not None
            elif baseline is not None:
                alarm = baseline.observe(errors)
            timings["detect"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            if alarm:
                alarms.append(index)
                model.fit(X, y)
                # PU-index de um modelo substituído não é comparável: recomeça o substream
                if pudd is not None:
                    pudd.restart(index + 1)
            elif config.classifier.regime == TrainingRegime.INCREMENTAL:
                model.partial_fit(X, y)
            timings["train"] += time.perf_counter() - t0

    timings["total"] = time.perf_counter() - started
    weights = np.asarray(sizes, dtype=np.float64)
    overall = float(np.average(accuracies, weights=weights)) if accuracies else 0.0
    delays, false_alarms = match_delays(alarms, schedule.drift_chunks, schedule.n_chunks)

    return RunMetrics(
        seed=seed,
        chunks=chunks_seen,
        chunk_accuracy=accuracies,
        chunk_sizes=sizes,
        overall_accuracy=overall,
        alarms=alarms,
        drift_chunks=schedule.drift_chunks,
        delays=delays,
        false_alarms=false_alarms,
        wall_ms={phase: round(seconds * 1000.0, 3) for phase, seconds in timings.items()},
    )


def _aggregate(config: ExperimentConfig, runs: List[RunMetrics]) -> ExperimentResult:
    accuracies = np.array([r.overall_accuracy for r in runs])
    delays = [d for r in runs for d in r.delays if d is not None]
    n_drifts = sum(len(r.drift_chunks) for r in runs)
    return ExperimentResult(
        label=config.detector.label,
        config=config,
        runs=runs,
        mean_accuracy=float(accuracies.mean()),
        std_accuracy=float(accuracies.std()),
        mean_delay=float(np.mean(delays)) if delays else None,
        detection_rate=sum(r.detected for r in runs) / n_drifts if n_drifts else None,
        mean_false_alarms=float(np.mean([r.false_alarms for r in runs])),
        mean_alarms=float(np.mean([len(r.alarms) for r in runs])),
    )


def run_frame(run: RunMetrics) -> pd.DataFrame:
    """Tabela chunk,accuracy,alarm de uma execução"""
    alarms = set(run.alarms)
    return pd.DataFrame({
        "chunk": run.chunks,
        "accuracy": run.chunk_accuracy,
        "alarm": [int(c in alarms) for c in run.chunks],
    })


def export_result(result: ExperimentResult, output_path: str) -> List[str]:
    """Grava um CSV por semente e o resumo JSON no diretório de saída"""
    os.makedirs(output_path, exist_ok=True)
    slug = result.label.replace(" ", "_").replace("(", "").replace(")", "").replace("=", "")
    written = []
    for run in result.runs:
        path = os.path.join(output_path, f"{slug}_seed{run.seed}.csv")
        run_frame(run).to_csv(path, index=False)
        written.append(path)

    summary = {
        "label": result.label,
        "mean_accuracy": result.mean_accuracy,
        "runs": [
            {
                "seed": run.seed,
                "overall_accuracy": run.overall_accuracy,
                "alarms": run.alarms,
                "delays": run.delays,
                "false_alarms": run.false_alarms,
                "wall_ms": run.wall_ms,
            }
            for run in result.runs
        ],
    }
    summary_path = os.path.join(output_path, f"{slug}_summary.json")
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    written.append(summary_path)
    logger.info("Resultados exportados", label=result.label, files=len(written), path=output_path)
    return written


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Executa todas as repetições (sementes seed..seed+repetitions-1) e agrega.

    Com max_workers > 1 as repetições rodam em processos separados; o
    resultado é sempre ordenado por semente.
    """
    logger.info(
        "Experimento iniciado",
        label=config.detector.label,
        stream=config.stream.kind.value,
        regime=config.classifier.regime.value,
        repetitions=config.repetitions,
    )
    seeds = config.seeds
    if config.max_workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.max_workers) as pool:
            runs = list(pool.map(run_single, [config] * len(seeds), seeds))
    else:
        runs = [run_single(config, seed) for seed in seeds]
    runs.sort(key=lambda r: r.seed)

    result = _aggregate(config, runs)
    logger.info(
        "Experimento concluído",
        label=result.label,
        mean_accuracy=round(result.mean_accuracy, 4),
        mean_alarms=result.mean_alarms,
        mean_false_alarms=result.mean_false_alarms,
    )
    if config.output_path:
        export_result(result, config.output_path)
    return result


def reference_band(config: ExperimentConfig) -> Optional[Tuple[float, float]]:
    """(acurácia de referência em %, tolerância) do experimento, se houver uma"""
    if config.classifier.regime != TrainingRegime.INCREMENTAL or config.stream.stationary:
        return None
    label = config.detector.label.removesuffix(" inc")
    return REFERENCE_ACCURACY.get((config.stream.kind, config.stream.noise_pct, label))


def band_deviation(config: ExperimentConfig, mean_accuracy: float) -> Dict[str, Any]:
    """Desvio absoluto da acurácia média em relação à faixa de referência"""
    band = reference_band(config)
    if band is None:
        return {}
    reference, tolerance = band
    deviation = abs(100.0 * mean_accuracy - reference)
    if deviation > tolerance:
        logger.warning(
            "Acurácia fora da faixa de referência",
            label=config.detector.label,
            accuracy=round(100.0 * mean_accuracy, 2),
            reference=reference,
            tolerance=tolerance,
        )
    return {"reference_accuracy": reference, "deviation": deviation, "within_band": deviation <= tolerance}


def compare_detectors(configs: Sequence[ExperimentConfig]) -> pd.DataFrame:
    """
    Uma linha por detector, na ordem recebida.

    Raises:
        ConfigError: se os experimentos não compartilharem stream e classificador
    """
    if not configs:
        raise ConfigError("Nenhuma configuração para comparar")
    reference = configs[0]
    for config in configs[1:]:
        if config.stream != reference.stream:
            raise ConfigError("Todos os experimentos devem usar o mesmo stream")
        if config.classifier != reference.classifier or config.repetitions != reference.repetitions:
            raise ConfigError("Todos os experimentos devem usar o mesmo classificador e repetições")

    rows = []
    for config in configs:
        result = run_experiment(config)
        rows.append(ComparisonRow(
            detector=result.label,
            mean_accuracy=result.mean_accuracy,
            mean_delay=result.mean_delay,
            detection_rate=result.detection_rate,
            false_alarms=result.mean_false_alarms,
            alarms=result.mean_alarms,
            **band_deviation(config, result.mean_accuracy),
        ).model_dump())
    return pd.DataFrame(rows, columns=list(ComparisonRow.model_fields))


def sigma_sweep(config: ExperimentConfig, sigmas: Sequence[float] = SIGMA_SWEEP) -> List[ExperimentConfig]:
    """Variações PUDD-x de um experimento, uma por sigma"""
    return [
        config.model_copy(update={"detector": config.detector.model_copy(update={"sigma": s})})
        for s in sigmas
    ]


def comparison_to_text(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")


class ExperimentService:
    """Fachada assíncrona usada pelas rotas; o trabalho pesado roda no executor"""

    async def detect(self, sub: SubStream, config: DetectorConfig) -> DetectionReport:
        loop = asyncio.get_event_loop()
        return await loop.run_in_executor(None, detect, sub, config)

    async def run(self, config: ExperimentConfig) -> ExperimentResult:
        if config.output_path:
            # Resultados pedidos pela API ficam sempre sob OUTPUT_FOLDER
            name = os.path.basename(os.path.normpath(config.output_path))
            config = config.model_copy(update={"output_path": os.path.join(settings.OUTPUT_FOLDER, name)})
        loop = asyncio.get_event_loop()
        return await loop.run_in_executor(None, run_experiment, config)

    async def compare(self, configs: List[ExperimentConfig]) -> pd.DataFrame:
        loop = asyncio.get_event_loop()
        return await loop.run_in_executor(None, compare_detectors, configs)
