class DriftError(Exception):
    """Erro base do serviço de detecção de drift"""


class ZeroMarginal(DriftError, ValueError):
    """Tabela de contingência com alguma linha ou coluna de soma zero"""


class TooFewSamples(DriftError, ValueError):
    """Amostras insuficientes para inicializar ou ajustar o bucketing"""


class OutOfRange(DriftError, ValueError):
    """Valor de PU-index fora do intervalo [0, 1]"""


class EmptyWindow(DriftError, ValueError):
    """Ponto de corte que deixa uma das janelas vazia"""


class UntrainedClass(DriftError):
    """Classe sem nenhuma instância vista pelo classificador"""


class DimensionMismatch(DriftError, ValueError):
    """Vetor de features com dimensão diferente da esperada pelo modelo"""


class LabelOutOfRange(DriftError, ValueError):
    """Rótulo fora do intervalo de classes do modelo"""


class ConfigError(DriftError, ValueError):
    """Configuração de experimento inconsistente"""
