import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from config import settings
from models.detection_models import PuSample
from models.experiment_models import DetectorKind
from models.stream_models import StreamKind, StreamSpec
from services import experiment_service, stream_service, theorem_service
from services.incremental_service import bench_incremental_vs_batch
from utils.errors import ConfigError, TooFewSamples
from utils.logger import configure_logging, get_logger

logger = get_logger("drift-cli")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_ACCEPTANCE_FAILURE = 3


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Arquivo TOML com [stream], [detector], [classifier] e [run]")
    parser.add_argument("--stream", choices=[k.value for k in StreamKind])
    parser.add_argument("--noise", type=int, choices=[0, 10, 20], help="Ruído do SEA em %%")
    parser.add_argument("--stationary", action="store_true", default=None, help="Sem drift injetado")
    parser.add_argument("--n-chunks", type=int)
    parser.add_argument("--chunk-size", type=int)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--theta", type=float)
    parser.add_argument("--skip-heuristic", choices=["paper_text", "paper_pseudocode", "off"])
    parser.add_argument("--table-mode", choices=["pudd", "eikmeans"])
    parser.add_argument("--regime", choices=["incremental", "train_once_until_alarm"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--reps", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="Diretório (run) ou arquivo CSV (compare, gen)")


def _flag_layer(args: argparse.Namespace, detector: Optional[str] = None) -> Dict[str, Any]:
    """Sobrescritas vindas da linha de comando; None significa 'não informado'"""
    return {
        "stream": {
            "kind": args.stream,
            "noise_pct": args.noise,
            "stationary": args.stationary,
            "n_chunks": args.n_chunks,
            "chunk_size": args.chunk_size,
            "seed": args.seed,
        },
        "detector": {
            "kind": detector,
            "sigma": args.sigma,
            "k": args.k,
            "theta": args.theta,
            "skip_heuristic": args.skip_heuristic,
            "table_mode": args.table_mode,
        },
        "classifier": {"regime": args.regime},
        "repetitions": args.reps,
        "max_workers": args.workers,
    }


def _file_layer(args: argparse.Namespace) -> Dict[str, Any]:
    return experiment_service.load_experiment_file(args.config) if args.config else {}


def cmd_run(args: argparse.Namespace) -> int:
    if args.detector and len(args.detector) > 1:
        raise ConfigError("run aceita um único --detector; use compare para vários")
    layer = _flag_layer(args, args.detector[0] if args.detector else None)
    layer["output_path"] = args.out
    config = experiment_service.build_config(_file_layer(args), layer)
    result = experiment_service.run_experiment(config)
    summary = {
        "label": result.label,
        "overall_accuracy": result.mean_accuracy,
        "std_accuracy": result.std_accuracy,
        "mean_delay": result.mean_delay,
        "detection_rate": result.detection_rate,
        "false_alarms": result.mean_false_alarms,
        "runs": [
            {"seed": r.seed, "overall_accuracy": r.overall_accuracy, "alarms": r.alarms,
             "delays": r.delays, "false_alarms": r.false_alarms, "wall_ms": r.wall_ms}
            for r in result.runs
        ],
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    detectors = args.detector or [DetectorKind.PUDD_BATCH.value, DetectorKind.DDM.value]
    base = _file_layer(args)
    configs = []
    for kind in detectors:
        config = experiment_service.build_config(base, _flag_layer(args, kind))
        if args.sigma_sweep and config.detector.is_pudd:
            configs.extend(experiment_service.sigma_sweep(config))
        else:
            configs.append(config)

    frame = experiment_service.compare_detectors(configs)
    print(experiment_service.comparison_to_text(frame))
    if args.out:
        frame.to_csv(args.out, index=False)
        logger.info("Tabela comparativa gravada", path=args.out)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    if not args.out:
        raise ConfigError("gen exige --out com o caminho do CSV")
    try:
        spec = StreamSpec(
            kind=args.stream or StreamKind.SEA,
            seed=args.seed or 0,
            noise_pct=args.noise or 0,
            chunk_size=args.chunk_size or settings.DEFAULT_CHUNK_SIZE,
            n_chunks=args.n_chunks or settings.DEFAULT_N_CHUNKS,
            period_chunks=settings.DEFAULT_PERIOD_CHUNKS,
            stationary=bool(args.stationary),
        )
    except ValidationError as e:
        raise ConfigError(f"Stream inválido: {e}") from e
    stream_service.export_csv(spec, args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    chunk_size = args.chunk_size or 1000
    n_chunks = max(1, args.n // chunk_size)
    spec = StreamSpec(kind=StreamKind.EQUAL_ERROR, seed=args.seed or 0, chunk_size=chunk_size,
                      n_chunks=max(2, n_chunks), period_chunks=settings.DEFAULT_PERIOD_CHUNKS)
    stream: List[PuSample] = []
    for chunk, _ in stream_service.gen_equal_error_stream(spec.seed, spec.schedule()):
        stream.extend(chunk.samples)

    config = experiment_service.build_config(_flag_layer(args)).detector.detector_config()
    result = bench_incremental_vs_batch(stream, config, chunk_size=chunk_size)
    print(result.model_dump_json(indent=2))
    return EXIT_OK if result.alarms_equal else EXIT_ACCEPTANCE_FAILURE


def cmd_proptest(args: argparse.Namespace) -> int:
    reports = []
    if args.suite in ("theorem1", "all"):
        reports.append(theorem_service.theorem1_suite(n_pairs=args.cases or 1000, seed=args.seed or 0))
    if args.suite in ("theorem2", "all"):
        reports.append(theorem_service.theorem2_suite(n_runs=args.cases or 100, seed=args.seed or 0))
    for report in reports:
        status = "OK" if report.passed else "FALHOU"
        print(f"{report.name}: {status} ({report.cases} casos, {report.failures} falhas) {json.dumps(report.details)}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ACCEPTANCE_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drift", description="Detecção de drift por PU-index (PUDD)")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Executa um experimento prequencial")
    _add_experiment_flags(run)
    run.add_argument("--detector", action="append", choices=[k.value for k in DetectorKind])
    run.set_defaults(handler=cmd_run)

    compare = sub.add_parser("compare", help="Tabela comparativa de detectores")
    _add_experiment_flags(compare)
    compare.add_argument("--detector", action="append", choices=[k.value for k in DetectorKind])
    compare.add_argument("--sigma-sweep", action="store_true", help="Expande PUDD em PUDD-1/3/5")
    compare.set_defaults(handler=cmd_compare)

    gen = sub.add_parser("gen", help="Exporta um stream sintético em CSV")
    _add_experiment_flags(gen)
    gen.set_defaults(handler=cmd_gen)

    bench = sub.add_parser("bench", help="Compara custo incremental x batch")
    _add_experiment_flags(bench)
    bench.add_argument("--n", type=int, default=10_000, help="Instâncias do stream")
    bench.set_defaults(handler=cmd_bench)

    proptest = sub.add_parser("proptest", help="Suítes de propriedades do PU-index")
    proptest.add_argument("--suite", choices=["theorem1", "theorem2", "all"], default="all")
    proptest.add_argument("--cases", type=int)
    proptest.add_argument("--seed", type=int)
    proptest.set_defaults(handler=cmd_proptest)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, json=settings.LOG_JSON)
    try:
        return args.handler(args)
    except (ConfigError, TooFewSamples) as e:
        logger.error("Erro de configuração", error=str(e))
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
