"""Closed-form reflection amplitudes.

Each surface reflects with the largest amplitude that still leaves its
harvested power equal to its consumption N*mu. A surface with no elements
gets amplitude 0.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InsufficientHarvest
from .model import Precoder, cascade_gain
from .scenario import ChannelSet, SystemConfig


def max_harvest_ris1(ch: ChannelSet, cfg: SystemConfig) -> float:
    """Harvest at RIS1 with full power splitting (beta1 = 0) and the whole budget."""
    return cfg.eta * cfg.p_max * float(np.sum(np.abs(ch.H1) ** 2))


def _amplitude(surface: str, need: float, available: float) -> float:
    if need == 0.0:
        return 1.0
    if available < need * (1.0 - 1e-12):  # rounding at the boundary still gives 0
        raise InsufficientHarvest(surface, need, available)
    return math.sqrt(max(0.0, 1.0 - need / available))


def beta1_opt(ch: ChannelSet, prec: Precoder, cfg: SystemConfig) -> float:
    if ch.N1 == 0:
        return 0.0
    available = cfg.eta * prec.power * float(np.sum(np.abs(ch.H1) ** 2))
    return _amplitude("RIS1", ch.N1 * cfg.mu, available)


def beta2_opt(ch: ChannelSet, prec: Precoder, theta1, beta1: float, cfg: SystemConfig) -> float:
    """Amplitude of RIS2; its incident power includes what RIS1 reflects towards it."""
    if ch.N2 == 0:
        return 0.0
    direct = cfg.eta * prec.power * float(np.sum(np.abs(ch.H2) ** 2))
    via_ris1 = cfg.eta * prec.power * beta1**2 * cascade_gain(ch, theta1) if ch.N1 else 0.0
    return _amplitude("RIS2", ch.N2 * cfg.mu, direct + via_ris1)


def optimal_betas(ch: ChannelSet, prec: Precoder, theta1, cfg: SystemConfig) -> tuple[float, float]:
    b1 = beta1_opt(ch, prec, cfg)
    return b1, beta2_opt(ch, prec, theta1, b1, cfg)
