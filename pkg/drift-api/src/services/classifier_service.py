from typing import Sequence

import numpy as np
from sklearn.naive_bayes import GaussianNB

from utils.errors import DimensionMismatch, LabelOutOfRange, UntrainedClass

# Suavização de variância do GaussianNB (fração da maior variância do lote) e piso absoluto
VAR_SMOOTHING = 1e-9
VAR_FLOOR = 1e-12


class GaussianNaiveBayes:
    """
    Classificador de sondagem: GaussianNB do scikit-learn treinado por
    partial_fit, com o conjunto de classes fixo desde o primeiro lote.

    Acrescenta validação de dimensões e rótulos, o piso absoluto de
    variância e a recusa em prever enquanto alguma classe não tiver
    instâncias.
    """

    def __init__(self, n_classes: int, n_features: int):
        if n_classes < 2:
            raise ValueError("São necessárias pelo menos duas classes")
        if n_features < 1:
            raise ValueError("n_features deve ser positivo")
        self.n_classes = n_classes
        self.n_features = n_features
        self.classes = np.arange(n_classes)
        self.reset()

    def reset(self) -> None:
        """Descarta o modelo treinado (usado após um alarme)"""
        self.model = GaussianNB(var_smoothing=VAR_SMOOTHING)
        self._floor_offset = 0.0

    @property
    def _trained(self) -> bool:
        return hasattr(self.model, "class_count_")

    @property
    def class_count_(self) -> np.ndarray:
        if not self._trained:
            return np.zeros(self.n_classes, dtype=np.float64)
        return self.model.class_count_

    @property
    def theta_(self) -> np.ndarray:
        if not self._trained:
            return np.zeros((self.n_classes, self.n_features), dtype=np.float64)
        return self.model.theta_

    @property
    def var_(self) -> np.ndarray:
        """Variâncias já suavizadas (epsilon e piso incluídos)"""
        if not self._trained:
            return np.zeros((self.n_classes, self.n_features), dtype=np.float64)
        return self.model.var_

    @property
    def epsilon_(self) -> float:
        if not self._trained:
            return VAR_FLOOR
        return max(float(self.model.epsilon_), VAR_FLOOR)

    @property
    def is_ready(self) -> bool:
        return bool((self.class_count_ > 0).all())

    def _check_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"Esperado {self.n_features} features, recebido shape {X.shape}"
            )
        return X

    def partial_fit(self, X, y) -> "GaussianNaiveBayes":
        """Atualiza as estatísticas com uma instância ou um lote (X, y)"""
        X = self._check_X(X)
        y = np.atleast_1d(np.asarray(y)).astype(np.int64)
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatch("X e y devem ter o mesmo número de linhas")
        if y.size == 0:
            return self
        if y.min() < 0 or y.max() >= self.n_classes:
            raise LabelOutOfRange(f"Rótulos devem estar em [0, {self.n_classes})")

        # O GaussianNB só conhece o próprio epsilon; o piso é retirado antes e recolocado depois
        if self._trained:
            self.model.var_ -= self._floor_offset
        self.model.partial_fit(X, y, classes=self.classes)
        self._floor_offset = max(0.0, VAR_FLOOR - float(self.model.epsilon_))
        self.model.var_ += self._floor_offset
        return self

    def fit(self, X, y) -> "GaussianNaiveBayes":
        self.reset()
        return self.partial_fit(X, y)

    def predict_proba(self, X) -> np.ndarray:
        """
        Probabilidades por classe; cada linha soma 1.

        Raises:
            UntrainedClass: se alguma classe ainda não tiver instâncias
        """
        X = self._check_X(X)
        if not self.is_ready:
            missing = np.flatnonzero(self.class_count_ == 0).tolist()
            raise UntrainedClass(f"Classes sem dados de treino: {missing}")
        return self.model.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def _check_label(proba: np.ndarray, y_true: int) -> None:
    if not 0 <= y_true < proba.shape[-1]:
        raise LabelOutOfRange(f"Rótulo {y_true} fora de [0, {proba.shape[-1]})")


def pu_index(proba: Sequence[float], y_true: int) -> float:
    """PU-index u = 1 - f_y(x): incerteza atribuída à classe verdadeira"""
    proba = np.asarray(proba, dtype=np.float64)
    _check_label(proba, y_true)
    return float(min(1.0, max(0.0, 1.0 - proba[y_true])))


def error_indicator(proba: Sequence[float], y_true: int) -> int:
    """1 se argmax(proba) != y_true; empates vão para o menor índice de classe"""
    proba = np.asarray(proba, dtype=np.float64)
    _check_label(proba, y_true)
    return int(int(np.argmax(proba)) != y_true)


def pu_indices(proba: np.ndarray, y_true: np.ndarray) -> np.ndarray:
    """Versão vetorizada de pu_index para um lote"""
    proba = np.asarray(proba, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if y_true.size and (y_true.min() < 0 or y_true.max() >= proba.shape[1]):
        raise LabelOutOfRange("Rótulo fora do intervalo de classes")
    return np.clip(1.0 - proba[np.arange(y_true.size), y_true], 0.0, 1.0)


def error_indicators(proba: np.ndarray, y_true: np.ndarray) -> np.ndarray:
    """Versão vetorizada de error_indicator (0 = acerto, 1 = erro)"""
    proba = np.asarray(proba, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if y_true.size and (y_true.min() < 0 or y_true.max() >= proba.shape[1]):
        raise LabelOutOfRange("Rótulo fora do intervalo de classes")
    return (np.argmax(proba, axis=1) != y_true).astype(np.int64)
