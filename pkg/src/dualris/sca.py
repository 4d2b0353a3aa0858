"""Transmit beamforming for fixed surfaces by successive convex approximation.

The SINR and harvest constraints are concave-from-below in w; each pass
replaces their convex left sides with first-order lower bounds at the
current iterate and solves the resulting convex problem. The bounds are
inner approximations, so every accepted iterate is feasible for the true
constraints and the transmit power never increases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .amplitude import optimal_betas
from .conic import PowerCut, SinrCut, solve_power_subproblem
from .errors import DomainError, InfeasibleAtInit, InsufficientHarvest
from .model import Precoder, RisState, all_sinr, cascade_gain, check_constraints, joint_channels
from .scenario import ChannelSet, SystemConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaSettings:
    max_iters: int = 30
    rel_obj_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or not self.rel_obj_tol > 0:
            raise ValueError("need max_iters >= 1 and rel_obj_tol > 0")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "ScaSettings":
        return cls(cfg.sca_max_iters, cfg.sca_rel_tol)


def linearize_sinr(g, W_prev, k: int, gamma_bar: float, sigma2: float) -> SinrCut:
    return SinrCut(k, np.asarray(g), np.asarray(W_prev)[:, k].copy(), float(gamma_bar), float(sigma2))


def linearize_power(W_prev, rhs: float) -> PowerCut:
    return PowerCut(np.asarray(W_prev).copy(), float(rhs))


def harvest_rhs(ch: ChannelSet, ris: RisState, cfg: SystemConfig) -> list[tuple[str, float]]:
    """Transmit power each surface needs at its current amplitude."""
    out = []
    if cfg.mu == 0:
        return out
    if ch.N1:
        gain = cfg.eta * (1.0 - ris.beta1**2) * float(np.sum(np.abs(ch.H1) ** 2))
        if gain <= 0:
            raise InsufficientHarvest("RIS1", ch.N1 * cfg.mu, 0.0)
        out.append(("RIS1", ch.N1 * cfg.mu / gain))
    if ch.N2:
        incident = float(np.sum(np.abs(ch.H2) ** 2))
        if ch.N1:
            incident += ris.beta1**2 * cascade_gain(ch, ris.theta1)
        gain = cfg.eta * (1.0 - ris.beta2**2) * incident
        if gain <= 0:
            raise InsufficientHarvest("RIS2", ch.N2 * cfg.mu, 0.0)
        out.append(("RIS2", ch.N2 * cfg.mu / gain))
    return out


def _directions(G: np.ndarray, kind: str) -> Optional[np.ndarray]:
    if kind == "mf":
        D = G.copy()
    else:
        if G.shape[1] > G.shape[0]:
            return None
        D = G @ np.linalg.pinv(G.conj().T @ G)
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        return None
    return D / norms


def feasibility_scale(ch: ChannelSet, ris: RisState, prec: Precoder, cfg: SystemConfig) -> float:
    """Smallest s >= 1 such that s * w meets every SINR and harvest constraint (inf if none)."""
    G = joint_channels(ch, ris)
    P = np.abs(G.conj().T @ prec.w) ** 2
    signal = np.diag(P)
    interf = P.sum(axis=1) - signal
    excess = signal - cfg.gamma_bar * interf
    if np.any(excess <= 0):
        return math.inf
    s2 = max(1.0, float(np.max(cfg.gamma_bar * cfg.sigma2 / excess)))
    for _, need in harvest_rhs(ch, ris, cfg):
        s2 = max(s2, need / prec.power)
    return math.sqrt(s2) * (1.0 + 1e-12)


def initial_precoder(ch: ChannelSet, theta1, theta2, cfg: SystemConfig) -> tuple[Precoder, RisState]:
    """Scaled matched filter (zero forcing if that cannot work) at the lowest feasible power.

    At a trial power p the amplitudes follow the closed form, the composite
    channels are rebuilt and the directions recomputed, so p alone decides
    feasibility. Bisection runs on log p up to the budget.
    """
    K = ch.K

    def build(p: float, kind: str):
        probe = Precoder(np.full((ch.M, K), math.sqrt(p / (ch.M * K)), complex))
        try:
            b1, b2 = optimal_betas(ch, probe, theta1, cfg)
        except InsufficientHarvest:
            return None
        ris = RisState(theta1, theta2, b1, b2)
        Dm = _directions(joint_channels(ch, ris), kind)
        if Dm is None:
            return None
        prec = Precoder(Dm * math.sqrt(p / K))
        gam = all_sinr(joint_channels(ch, ris), prec, cfg.sigma2)
        if np.all(gam >= cfg.gamma_bar * (1 + 1e-9)):
            return prec, ris
        return None

    p_lo = cfg.p_max * 1e-24
    if cfg.mu > 0 and ch.N1:
        # just above the RIS1 harvest floor so rounding cannot leave it short
        p_lo = max(p_lo, ch.N1 * cfg.mu / (cfg.eta * float(np.sum(np.abs(ch.H1) ** 2))) * (1 + 1e-9))
    for kind in ("mf", "zf"):
        best = build(cfg.p_max, kind)
        if best is None:
            continue
        low = build(p_lo, kind)
        if low is not None:
            return low
        lo, hi = math.log(p_lo), math.log(cfg.p_max)
        while hi - lo > 1e-11:
            mid = 0.5 * (lo + hi)
            trial = build(math.exp(mid), kind)
            if trial is None:
                lo = mid
            else:
                hi, best = mid, trial
        return best
    raise InfeasibleAtInit("no scaled matched-filter or zero-forcing precoder meets the constraints within p_max")


@dataclass
class ScaResult:
    precoder: Precoder
    iterations: int
    objective: list[float] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)


def build_cuts(ch: ChannelSet, ris: RisState, W: np.ndarray, cfg: SystemConfig):
    G = joint_channels(ch, ris)
    sinr_cuts = [linearize_sinr(G[:, k], W, k, cfg.gamma_bar, cfg.sigma2) for k in range(ch.K)]
    power_cuts = [linearize_power(W, rhs) for _, rhs in harvest_rhs(ch, ris, cfg)]
    return sinr_cuts, power_cuts


def sca_loop(
    ch: ChannelSet,
    ris: RisState,
    cfg: SystemConfig,
    settings: Optional[ScaSettings] = None,
    w0: Optional[Precoder] = None,
) -> ScaResult:
    settings = settings or ScaSettings.from_config(cfg)
    if w0 is None:
        w0, ris0 = initial_precoder(ch, ris.theta1, ris.theta2, cfg)
    W = w0.w
    if np.any(np.linalg.norm(W, axis=0) == 0):
        raise DomainError("SCA expansion point has a zero beamformer")
    res = ScaResult(w0, 0, [w0.power])
    for n in range(settings.max_iters):
        sinr_cuts, power_cuts = build_cuts(ch, ris, W, cfg)
        sol = solve_power_subproblem(sinr_cuts, power_cuts, cfg.p_max, W.shape, cfg.solver_tol)
        if not sol.ok:
            if n == 0:
                raise InfeasibleAtInit(f"beamforming subproblem {sol.status.value} at the expansion point")
            log.warning("SCA pass %d ended with %s; keeping previous iterate", n, sol.status.value)
            res.rows.append({"n": n + 1, "status": sol.status.value})
            break
        cand = Precoder(sol.x)
        s = feasibility_scale(ch, ris, cand, cfg)
        if s > 1.0 and math.isfinite(s) and cand.power * s * s <= cfg.p_max:
            cand = cand.scaled(s)
        prev = res.objective[-1]
        if cand.power > prev:
            # no descent possible; the expansion point is already optimal
            res.rows.append({"n": n + 1, "objective": prev, "status": "stalled"})
            res.iterations = n + 1
            break
        W = cand.w
        res.precoder = cand
        res.objective.append(cand.power)
        res.iterations = n + 1
        rep = check_constraints(ch, ris, cand, cfg)
        res.rows.append({
            "n": n + 1,
            "objective": cand.power,
            "min_sinr_margin": rep.min_sinr_margin,
            "harvest1_margin": rep.harvest1_margin,
            "harvest2_margin": rep.harvest2_margin,
            "status": sol.status.value,
        })
        if abs(prev - cand.power) <= settings.rel_obj_tol * prev:
            break
    return res
