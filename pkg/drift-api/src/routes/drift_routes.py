from typing import Any, Dict, List

from fastapi import APIRouter, Depends, HTTPException
from pydantic import ValidationError

from models.detection_models import DetectionReport, DetectRequest, SubStream
from models.experiment_models import ExperimentConfig, ExperimentResult
from services.experiment_service import ExperimentService
from utils.errors import ConfigError, DriftError
from utils.logger import get_logger

logger = get_logger("drift-routes")

router = APIRouter(tags=["Detecção de Drift"])


def get_experiment_service():
    return ExperimentService()


@router.post("/detect", response_model=DetectionReport)
async def detect_drift(
    request: DetectRequest,
    experiment_service: ExperimentService = Depends(get_experiment_service),
):
    """Executa o PUDD em lote sobre os chunks enviados (t1..t)"""
    try:
        sub = SubStream(chunks=[c.to_chunk() for c in request.chunks])
    except (ValidationError, DriftError) as e:
        logger.error("Substream inválido", error=str(e))
        raise HTTPException(status_code=400, detail=f"Substream inválido: {str(e)}")

    try:
        return await experiment_service.detect(sub, request.config)
    except Exception as e:
        logger.error("Erro ao detectar drift", error=str(e))
        raise HTTPException(status_code=500, detail=f"Erro ao detectar drift: {str(e)}")


@router.post("/experiments/run", response_model=ExperimentResult)
async def run_experiment(
    config: ExperimentConfig,
    experiment_service: ExperimentService = Depends(get_experiment_service),
):
    try:
        return await experiment_service.run(config)
    except ConfigError as e:
        logger.error("Configuração de experimento inválida", error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Erro ao executar experimento", error=str(e))
        raise HTTPException(status_code=500, detail=f"Erro ao executar experimento: {str(e)}")


@router.post("/experiments/compare", response_model=List[Dict[str, Any]])
async def compare_experiments(
    configs: List[ExperimentConfig],
    experiment_service: ExperimentService = Depends(get_experiment_service),
):
    """Tabela comparativa: uma linha por detector, na ordem enviada"""
    try:
        frame = await experiment_service.compare(configs)
    except ConfigError as e:
        logger.error("Comparação inválida", error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Erro ao comparar detectores", error=str(e))
        raise HTTPException(status_code=500, detail=f"Erro ao comparar detectores: {str(e)}")
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
