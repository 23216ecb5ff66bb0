import math
from enum import Enum

from utils.logger import get_logger

logger = get_logger("baseline-service")


class DetectorStatus(str, Enum):
    STABLE = "stable"
    WARNING = "warning"
    DRIFT = "drift"


class DDM:
    """
    Drift Detection Method sobre o indicador de erro por instância.

    Acompanha p (taxa de erro) e s = sqrt(p(1 - p)/n) e guarda o mínimo de
    p + s. Sinaliza Warning acima de p_min + warn_coeff * s_min e Drift acima
    de p_min + drift_coeff * s_min; após Drift todo o estado é reiniciado.

    Attributes:
        min_instances: instâncias mínimas antes de qualquer sinal
        warn_coeff: nível de alerta (2.0)
        drift_coeff: nível de drift (3.0)
    """

    def __init__(self, min_instances: int = 30, warn_coeff: float = 2.0, drift_coeff: float = 3.0):
        if warn_coeff >= drift_coeff:
            raise ValueError("warn_coeff deve ser menor que drift_coeff")
        self.min_instances = min_instances
        self.warn_coeff = float(warn_coeff)
        self.drift_coeff = float(drift_coeff)
        self.reset()

    def reset(self) -> None:
        self.n = 0
        self.p = 1.0
        self.s = 0.0
        self.p_min = float("inf")
        self.s_min = float("inf")

    def update(self, error: int) -> DetectorStatus:
        self.n += 1
        self.p += (error - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)

        if self.n < self.min_instances:
            return DetectorStatus.STABLE

        if self.p + self.s <= self.p_min + self.s_min:
            self.p_min = self.p
            self.s_min = self.s

        level = self.p + self.s
        if level > self.p_min + self.drift_coeff * self.s_min:
            logger.debug("DDM sinalizou drift", n=self.n, p=self.p, p_min=self.p_min)
            self.reset()
            return DetectorStatus.DRIFT
        if level > self.p_min + self.warn_coeff * self.s_min:
            return DetectorStatus.WARNING
        return DetectorStatus.STABLE


class PageHinkley:
    """
    Teste de Page-Hinkley para aumento da média do indicador de erro.

    m_t acumula (x - média - delta); M_t é o mínimo de m_t. Drift quando
    m_t - M_t > threshold, seguido de reinício.
    """

    def __init__(self, min_instances: int = 30, delta: float = 0.005, threshold: float = 50.0, alpha: float = 1.0):
        self.min_instances = min_instances
        self.delta = delta
        self.threshold = threshold
        self.alpha = alpha
        self.reset()

    def reset(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m_t = 0.0
        self.M_t = 0.0

    def update(self, error: int) -> DetectorStatus:
        self.n += 1
        self.mean += (error - self.mean) / self.n
        self.m_t = self.alpha * self.m_t + (error - self.mean - self.delta)
        self.M_t = min(self.M_t, self.m_t)

        if self.n < self.min_instances:
            return DetectorStatus.STABLE
        if self.m_t - self.M_t > self.threshold:
            logger.debug("Page-Hinkley sinalizou drift", n=self.n, statistic=self.m_t - self.M_t)
            self.reset()
            return DetectorStatus.DRIFT
        return DetectorStatus.STABLE


def ddm_update(state: DDM, error: int) -> DetectorStatus:
    return state.update(error)


def ph_update(state: PageHinkley, error: int) -> DetectorStatus:
    return state.update(error)
