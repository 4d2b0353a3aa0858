"""Block coordinate descent over amplitudes, beamformers and phases."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .amplitude import optimal_betas
from .errors import InfeasibleAtInit, InsufficientHarvest
from .model import Precoder, RisState, check_constraints, derive_channels
from .penalty import optimize_theta1, optimize_theta2
from .sca import ScaSettings, initial_precoder, sca_loop
from .scenario import ChannelSet, SystemConfig, make_rng, random_phases

log = logging.getLogger(__name__)

CONVERGED = "Converged"
MAX_ITERS = "MaxIters"
INFEASIBLE_AT_INIT = "InfeasibleAtInit"
INSUFFICIENT_HARVEST = "InsufficientHarvest"

MODES = ("double", "single_bs", "single_user", "random_phase")


@dataclass
class SolveTrace:
    records: list[dict] = field(default_factory=list)
    status: str = ""
    message: str = ""
    shortfall: float = 0.0

    @property
    def powers(self) -> list[float]:
        return [r["power"] for r in self.records]

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, MAX_ITERS)

    @property
    def outer_iterations(self) -> int:
        return max(0, len(self.records) - 1)

    @property
    def phase_updates(self) -> int:
        return sum(r.get("phase_updates", 0) for r in self.records)

    def to_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True, default=_jsonable) for r in self.records]
        lines.append(json.dumps({"status": self.status, "message": self.message, "shortfall": self.shortfall}))
        return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


@dataclass
class SolveResult:
    precoder: Optional[Precoder]
    ris: Optional[RisState]
    trace: SolveTrace

    @property
    def power(self) -> float:
        return self.precoder.power if self.precoder is not None and self.trace.ok else math.nan


def _record(i, prec, ris, rep, **extra) -> dict:
    r = {
        "i": i,
        "power": prec.power,
        "beta1": ris.beta1,
        "beta2": ris.beta2,
        "min_sinr_margin": rep.min_sinr_margin,
        "harvest1_margin": rep.harvest1_margin,
        "harvest2_margin": rep.harvest2_margin,
    }
    r.update(extra)
    return r


def _phase_sweeps(ch, dc, ris, prec, cfg):
    """Alternate theta1 and theta2 updates until the worst SINR margin settles."""
    sweeps, updates, events = 0, 0, []
    best = check_constraints(ch, ris, prec, cfg).min_sinr_margin
    for sweeps in range(1, cfg.phase_sweeps + 1):
        ris, r1 = optimize_theta1(ch, dc, ris, prec, cfg)
        ris, r2 = optimize_theta2(ch, dc, ris, prec, cfg)
        for r in (r1, r2):
            if not r.get("skipped"):
                updates += 1
                events.append({k: r[k] for k in ("side", "accepted", "iterations", "penalty", "stalled")})
        margin = check_constraints(ch, ris, prec, cfg).min_sinr_margin
        gain = margin - best
        best = max(best, margin)
        if gain < cfg.phase_sweep_tol * max(abs(best), cfg.gamma_bar * 1e-12):
            break
    return ris, sweeps, updates, events


def bcd_solve(
    ch: ChannelSet,
    cfg: SystemConfig,
    realization: int = 0,
    optimize_phases: bool = True,
    theta0: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> SolveResult:
    """Minimize transmit power by alternating the amplitude, beamformer and phase blocks.

    Initial phases are uniform random from stream (realization, 1) of
    ``cfg.seed`` unless ``theta0`` is given. Stops when the change in
    transmit power between outer iterations is at most ``cfg.epsilon`` or
    after ``cfg.i_max`` outer iterations.
    """
    trace = SolveTrace()
    if theta0 is None:
        rng = make_rng(cfg.seed, realization, 1)
        theta0 = (random_phases(rng, ch.N1), random_phases(rng, ch.N2))
    try:
        prec, ris = initial_precoder(ch, theta0[0], theta0[1], cfg)
    except InfeasibleAtInit as exc:
        return _failed(trace, INFEASIBLE_AT_INIT, exc, ch, cfg)
    dc = derive_channels(ch)
    settings = ScaSettings.from_config(cfg)
    trace.records.append(_record(0, prec, ris, check_constraints(ch, ris, prec, cfg)))

    trace.status = MAX_ITERS
    for i in range(1, cfg.i_max + 1):
        power_prev = prec.power
        try:
            b1, b2 = optimal_betas(ch, prec, ris.theta1, cfg)
        except InsufficientHarvest as exc:
            return _failed(trace, INSUFFICIENT_HARVEST, exc, ch, cfg, exc.shortfall, prec, ris)
        cand = ris.with_betas(b1, b2)
        beta_kept = False
        try:
            sca = sca_loop(ch, cand, cfg, settings, prec)
            ris = cand
        except InfeasibleAtInit:
            # the refreshed amplitudes broke an SINR constraint at w; the
            # previous amplitudes are still feasible with it
            beta_kept = True
            try:
                sca = sca_loop(ch, ris, cfg, settings, prec)
            except InfeasibleAtInit as exc:
                log.warning("outer iteration %d: beamforming step failed (%s); stopping", i, exc)
                trace.message = str(exc)
                break
        prec = sca.precoder
        updates, sweeps, events = 0, 0, []
        if optimize_phases:
            ris, sweeps, updates, events = _phase_sweeps(ch, dc, ris, prec, cfg)
        rep = check_constraints(ch, ris, prec, cfg)
        step = abs(prec.power - power_prev)
        trace.records.append(
            _record(
                i, prec, ris, rep,
                O=step,
                S1=sca.iterations,
                S2=sweeps,
                phase_updates=updates,
                rejections=sum(not e["accepted"] for e in events),
                stalls=sum(bool(e["stalled"]) for e in events),
                beta_kept=beta_kept,
            )
        )
        if step <= cfg.epsilon:
            trace.status = CONVERGED
            break
    trace.message = f"Z={trace.outer_iterations}"
    return SolveResult(prec, ris, trace)


def _failed(trace, status, exc, ch, cfg, shortfall=0.0, prec=None, ris=None) -> SolveResult:
    trace.status = status
    trace.message = str(exc)
    trace.shortfall = float(shortfall)
    if status == INFEASIBLE_AT_INIT and cfg.mu > 0 and ch.N1:
        # report the BS-side shortfall when harvesting is what rules out every start
        from .amplitude import max_harvest_ris1

        gap = ch.N1 * cfg.mu - max_harvest_ris1(ch, cfg)
        if gap > 0:
            trace.status = INSUFFICIENT_HARVEST
            trace.shortfall = gap
            trace.message = f"RIS1 cannot harvest {ch.N1 * cfg.mu:.6g} W at p_max (shortfall {gap:.6g} W)"
    return SolveResult(prec, ris, trace)


def baseline_config(cfg: SystemConfig, mode: str) -> SystemConfig:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode == "single_bs":
        return cfg.replace(N2=0)
    if mode == "single_user":
        return cfg.replace(N1=0)
    return cfg


def solve_baseline(ch: ChannelSet, cfg: SystemConfig, mode: str, realization: int = 0) -> SolveResult:
    """Run one scheme on a realization.

    ``single_bs`` / ``single_user`` drop RIS2 / RIS1 from the channel set;
    ``random_phase`` keeps the initial random phases.
    """
    cfg = baseline_config(cfg, mode)
    if mode == "single_bs":
        ch = ChannelSet(ch.H1, ch.H2[:, :0], ch.D[:, :0], ch.h1, ch.h2[:, :0], ch.user_positions)
    elif mode == "single_user":
        ch = ChannelSet(ch.H1[:, :0], ch.H2, ch.D[:0, :], ch.h1[:, :0], ch.h2, ch.user_positions)
    return bcd_solve(ch, cfg, realization, optimize_phases=(mode != "random_phase"))
