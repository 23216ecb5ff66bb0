from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import uvicorn

from config import settings
from routes import drift_routes
from utils.errors import DriftError
from utils.logger import configure_logging, get_logger

configure_logging(settings.LOG_LEVEL, json=settings.LOG_JSON)
logger = get_logger("drift-api")

app = FastAPI(
    title=settings.APP_NAME,
    description="Serviço de detecção de concept drift por PU-index (PUDD) e experimentos prequenciais",
    version="0.1.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.ALLOWED_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(drift_routes.router, prefix="/api/v1")


@app.exception_handler(DriftError)
async def drift_error_handler(request: Request, exc: DriftError):
    # Erros de domínio que escapam das rotas são problemas de entrada
    logger.error("Erro de domínio não tratado", path=request.url.path, error=str(exc))
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.on_event("startup")
async def startup_event():
    logger.info(
        "API de Drift inicializada",
        port=settings.PORT,
        sigma=settings.DEFAULT_SIGMA,
        output_folder=settings.OUTPUT_FOLDER,
    )


@app.get("/health")
async def health_check():
    return {"status": "healthy", "service": "drift-api"}


if __name__ == "__main__":
    uvicorn.run("main:app", host="0.0.0.0", port=settings.PORT, reload=settings.DEBUG)
