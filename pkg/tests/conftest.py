from __future__ import annotations

import numpy as np
import pytest

from dualris.model import Precoder, RisState
from dualris.scenario import ChannelSet


def cgauss(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def unit_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def random_channels(rng, M=2, K=2, N1=3, N2=2, scale=1.0) -> ChannelSet:
    return ChannelSet(
        scale * cgauss(rng, M, N1),
        scale * cgauss(rng, M, N2),
        cgauss(rng, N1, N2),
        cgauss(rng, K, N1),
        cgauss(rng, K, N2),
    )


def random_state(rng, ch: ChannelSet, beta1=None, beta2=None) -> RisState:
    return RisState(
        unit_phases(rng, ch.N1),
        unit_phases(rng, ch.N2),
        rng.random() if beta1 is None else beta1,
        rng.random() if beta2 is None else beta2,
    )


def random_precoder(rng, M: int, K: int) -> Precoder:
    return Precoder(cgauss(rng, M, K))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
