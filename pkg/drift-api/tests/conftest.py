import os
import sys

import numpy as np
import pytest

# Adiciona src/ ao PYTHONPATH
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))

from models.detection_models import Chunk, SubStream  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_chunk(rng, index, size=200, error_rate=0.2, pu_correct=(0.0, 0.5), pu_wrong=(0.5, 1.0)):
    """Chunk sintético: corretos com PU em pu_correct e errados em pu_wrong"""
    correct = rng.random(size) >= error_rate
    pu = np.where(
        correct,
        rng.uniform(*pu_correct, size=size),
        rng.uniform(*pu_wrong, size=size),
    )
    return Chunk(index=index, pu=pu, correct=correct)


def make_substream(rng, n_chunks, start=0, **kwargs):
    return SubStream(chunks=[make_chunk(rng, start + i, **kwargs) for i in range(n_chunks)])
