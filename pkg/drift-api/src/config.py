from typing import List
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    # Configurações básicas da aplicação
    APP_NAME: str = "Analisa.ai - Drift API"
    DEBUG: bool = Field(default=False)
    PORT: int = Field(default=8005)

    # Configurações de logging
    LOG_LEVEL: str = Field(default="INFO")
    LOG_JSON: bool = Field(default=False)

    # Configurações de armazenamento
    OUTPUT_FOLDER: str = Field(default="/tmp/analisaai/drift")

    # Configurações de CORS
    ALLOWED_ORIGINS: List[str] = Field(default=["*"])

    # Parâmetros padrão do detector PUDD
    DEFAULT_SIGMA: float = Field(default=1e-5)
    DEFAULT_K: int = Field(default=5)
    DEFAULT_THETA: float = Field(default=2.0)
    DEFAULT_MIN_EXPECTED: float = Field(default=5.0)
    DEFAULT_MAX_AMPLIFY_ROUNDS: int = Field(default=20)

    # Parâmetros padrão dos streams sintéticos
    DEFAULT_CHUNK_SIZE: int = Field(default=1000)
    DEFAULT_N_CHUNKS: int = Field(default=100)
    DEFAULT_PERIOD_CHUNKS: int = Field(default=10)

    # Parâmetros padrão dos experimentos
    DEFAULT_REPETITIONS: int = Field(default=10)
    MAX_WORKERS: int = Field(default=1)  # Processos paralelos por experimento

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="DRIFT_",
    )

# Carregar configurações
settings = Settings()
