"""Composite channel, SINR and harvested power for a double-RIS downlink.

The composite channel of user k is

    g_k = b1 H1 T1 h1k + b2 H2 T2 h2k + b1 b2 H1 T1 D T2 h2k

with T = diag(theta) and amplitude b of each surface. The received signal
is g_k^H x, so all SINR terms are |g_k^H w_i|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelSet, SystemConfig


@dataclass(frozen=True)
class RisState:
    theta1: np.ndarray
    theta2: np.ndarray
    beta1: float = 1.0
    beta2: float = 1.0

    def with_betas(self, beta1: float, beta2: float) -> "RisState":
        return RisState(self.theta1, self.theta2, float(beta1), float(beta2))

    def with_theta1(self, theta1) -> "RisState":
        return RisState(np.asarray(theta1), self.theta2, self.beta1, self.beta2)

    def with_theta2(self, theta2) -> "RisState":
        return RisState(self.theta1, np.asarray(theta2), self.beta1, self.beta2)


@dataclass(frozen=True)
class Precoder:
    """Beamformers as the columns of an (M, K) array."""

    w: np.ndarray

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def scaled(self, c) -> "Precoder":
        return Precoder(self.w * c)


@dataclass(frozen=True)
class DerivedChannels:
    R1: np.ndarray  # (K, M, N1): H1 diag(h1k)
    R2: np.ndarray  # (K, M, N2): H2 diag(h2k)
    Dt: np.ndarray  # (K, N1, N2): D diag(h2k)
    Q: np.ndarray  # (K, N2, M, N1): H1 diag(Dt_k[:, n2])


def derive_channels(ch: ChannelSet) -> DerivedChannels:
    R1 = ch.H1[None, :, :] * ch.h1[:, None, :]
    R2 = ch.H2[None, :, :] * ch.h2[:, None, :]
    Dt = ch.D[None, :, :] * ch.h2[:, None, :]
    Q = ch.H1[None, None, :, :] * np.transpose(Dt, (0, 2, 1))[:, :, None, :]
    return DerivedChannels(R1, R2, Dt, Q)


def compose_channel(ch: ChannelSet, dc: DerivedChannels, ris: RisState, k: int) -> np.ndarray:
    """g_k from the expanded form sum_l b_l R_lk theta_l + b1 b2 sum_n Q_nk theta1 theta2_n."""
    g = ris.beta1 * dc.R1[k] @ ris.theta1 + ris.beta2 * dc.R2[k] @ ris.theta2
    if ch.N1 and ch.N2:
        g = g + ris.beta1 * ris.beta2 * np.einsum("nmi,i,n->m", dc.Q[k], ris.theta1, ris.theta2)
    return g


def compose_direct(ch: ChannelSet, ris: RisState, k: int) -> np.ndarray:
    """g_k straight from the cascade of diagonal phase matrices."""
    T1, T2 = np.diag(ris.theta1), np.diag(ris.theta2)
    return (
        ris.beta1 * ch.H1 @ T1 @ ch.h1[k]
        + ris.beta2 * ch.H2 @ T2 @ ch.h2[k]
        + ris.beta1 * ris.beta2 * ch.H1 @ T1 @ ch.D @ T2 @ ch.h2[k]
    )


def joint_channels(ch: ChannelSet, ris: RisState) -> np.ndarray:
    """All composite channels as the columns of an (M, K) matrix."""
    A1 = ch.H1 * ris.theta1  # H1 T1
    A2 = ch.H2 * ris.theta2
    via2 = ch.h2 * ris.theta2  # rows: T2 h2k
    G = ris.beta1 * A1 @ ch.h1.T + ris.beta2 * A2 @ ch.h2.T
    G = G + ris.beta1 * ris.beta2 * A1 @ (ch.D @ via2.T)
    return G


def sinr(G: np.ndarray, prec: Precoder, k: int, sigma2: float) -> float:
    y = G[:, k].conj() @ prec.w  # g_k^H w_i for all i
    p = np.abs(y) ** 2
    return float(p[k] / (p.sum() - p[k] + sigma2))


def all_sinr(G: np.ndarray, prec: Precoder, sigma2: float) -> np.ndarray:
    P = np.abs(G.conj().T @ prec.w) ** 2
    signal = np.diag(P)
    return signal / (P.sum(axis=1) - signal + sigma2)


def cascade_gain(ch: ChannelSet, theta1) -> float:
    """||H1 diag(theta1) D||_F^2, the RIS1-reflected power factor seen by RIS2."""
    return float(np.sum(np.abs((ch.H1 * theta1) @ ch.D) ** 2))


def harvest_ris1(ch: ChannelSet, prec: Precoder, beta1: float, eta: float) -> float:
    return eta * (1.0 - beta1**2) * prec.power * float(np.sum(np.abs(ch.H1) ** 2))


def harvest_ris2(ch: ChannelSet, prec: Precoder, ris: RisState, eta: float) -> float:
    incident = float(np.sum(np.abs(ch.H2) ** 2)) + ris.beta1**2 * cascade_gain(ch, ris.theta1)
    return eta * (1.0 - ris.beta2**2) * prec.power * incident


@dataclass(frozen=True)
class ConstraintReport:
    """Margins of the power-minimization constraints; positive means satisfied."""

    sinr: np.ndarray
    sinr_margin: np.ndarray  # Gamma_k - gamma_bar
    harvest1_margin: float  # watts
    harvest2_margin: float
    power_margin: float
    unit_modulus_residual: float
    amplitude_in_range: bool

    @property
    def min_sinr_margin(self) -> float:
        return float(np.min(self.sinr_margin))

    def feasible(self, tol: float, gamma_bar: float = 1.0) -> bool:
        """Check every margin against ``-tol``; SINR margins are taken relative to ``gamma_bar``."""
        return (
            self.min_sinr_margin >= -tol * gamma_bar
            and self.harvest1_margin >= -tol
            and self.harvest2_margin >= -tol
            and self.power_margin >= -tol
            and self.unit_modulus_residual <= 1e-9
            and self.amplitude_in_range
        )

    def to_dict(self) -> dict:
        return {
            "sinr": [float(x) for x in self.sinr],
            "sinr_margin": [float(x) for x in self.sinr_margin],
            "harvest1_margin": self.harvest1_margin,
            "harvest2_margin": self.harvest2_margin,
            "power_margin": self.power_margin,
            "unit_modulus_residual": self.unit_modulus_residual,
            "amplitude_in_range": self.amplitude_in_range,
        }


def check_constraints(ch: ChannelSet, ris: RisState, prec: Precoder, cfg: SystemConfig) -> ConstraintReport:
    G = joint_channels(ch, ris)
    gam = all_sinr(G, prec, cfg.sigma2)
    need1, need2 = ch.N1 * cfg.mu, ch.N2 * cfg.mu
    m1 = harvest_ris1(ch, prec, ris.beta1, cfg.eta) - need1 if ch.N1 else 0.0
    m2 = harvest_ris2(ch, prec, ris, cfg.eta) - need2 if ch.N2 else 0.0
    resid = max(
        float(np.max(np.abs(np.abs(ris.theta1) - 1.0), initial=0.0)),
        float(np.max(np.abs(np.abs(ris.theta2) - 1.0), initial=0.0)),
    )
    in_range = 0.0 <= ris.beta1 <= 1.0 and 0.0 <= ris.beta2 <= 1.0
    return ConstraintReport(gam, gam - cfg.gamma_bar, m1, m2, cfg.p_max - prec.power, resid, in_range)
