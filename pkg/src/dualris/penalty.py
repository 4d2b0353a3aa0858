"""Phase-shift updates by semidefinite lifting with a rank-one penalty.

For fixed beamformers and amplitudes, g_k^H w_i is affine in the phases of
either surface: theta^H q_ki + qbar_ki. Lifting theta_ext = [theta; 1] to
Psi = theta_ext theta_ext^H turns each SINR constraint into a linear
inequality in Psi. Rank one is pursued by penalizing tr(Psi) - lambda_max(Psi)
and majorizing the concave part with the principal eigenvector of the
previous iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conic import SdpRow, solve_phase_sdp
from .errors import DomainError
from .model import DerivedChannels, Precoder, RisState, check_constraints
from .scenario import ChannelSet, SystemConfig

log = logging.getLogger(__name__)

ROW_MARGIN = 1e-6  # relative head-room on lifted constraints, absorbs extraction error
HARVEST_ROUNDING = 1e-12


# -- affine forms ---------------------------------------------------------

def _theta1_coeffs(dc: DerivedChannels, ris: RisState, k: int):
    A = ris.beta1 * dc.R1[k]
    if dc.Q.shape[1] and dc.Q.shape[3]:
        A = A + ris.beta1 * ris.beta2 * np.einsum("nmi,n->mi", dc.Q[k], ris.theta2)
    b = ris.beta2 * dc.R2[k] @ ris.theta2
    return A, b


def _theta2_coeffs(dc: DerivedChannels, ris: RisState, k: int):
    A = ris.beta2 * dc.R2[k]
    if dc.Q.shape[1] and dc.Q.shape[3]:
        A = A + ris.beta1 * ris.beta2 * np.einsum("nmi,i->mn", dc.Q[k], ris.theta1)
    b = ris.beta1 * dc.R1[k] @ ris.theta1
    return A, b


def q_vectors(dc: DerivedChannels, ris: RisState, prec: Precoder, k: int, i: int):
    """(q_ki, qbar_ki) with theta1^H q_ki + qbar_ki = g_k^H w_i."""
    A, b = _theta1_coeffs(dc, ris, k)
    w = prec.w[:, i]
    return A.conj().T @ w, complex(b.conj() @ w)


def p_vectors(dc: DerivedChannels, ris: RisState, prec: Precoder, k: int, i: int):
    """(p_ki, pbar_ki) with theta2^H p_ki + pbar_ki = g_k^H w_i."""
    A, b = _theta2_coeffs(dc, ris, k)
    w = prec.w[:, i]
    return A.conj().T @ w, complex(b.conj() @ w)


def lift_b(q, qbar) -> np.ndarray:
    v = np.append(np.asarray(q, dtype=complex), qbar)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class SinrLift:
    """B[k, i] for every user pair, each (N+1) x (N+1)."""

    B: np.ndarray

    @classmethod
    def build(cls, dc: DerivedChannels, ris: RisState, prec: Precoder, side: int) -> "SinrLift":
        K = prec.w.shape[1]
        vec = q_vectors if side == 1 else p_vectors
        B = np.array([[lift_b(*vec(dc, ris, prec, k, i)) for i in range(K)] for k in range(K)])
        return cls(B)

    @property
    def n(self) -> int:
        return self.B.shape[-1]

    def sinr_rows(self, gamma_bar: float, sigma2: float) -> list[SdpRow]:
        """One row per user: tr(B_kk Psi) - gamma_bar sum_{i != k} tr(B_ki Psi) >= gamma_bar sigma2.

        The slack coefficient is (N+1) lambda_max(B_kk), the largest signal
        term any feasible Psi can produce, so the common slack is unitless.
        """
        K = self.B.shape[0]
        rows = []
        for k in range(K):
            A = self.B[k, k] - gamma_bar * (self.B[k].sum(axis=0) - self.B[k, k])
            top = self.n * float(np.real(np.trace(self.B[k, k])))
            rows.append(SdpRow(A, gamma_bar * sigma2 * (1 + ROW_MARGIN), max(top, 1e-300)))
        return rows


# -- penalty ---------------------------------------------------------------

def principal_eigvec(Psi: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenpair; the vector's first non-negligible entry is made real positive."""
    vals, vecs = np.linalg.eigh(0.5 * (Psi + Psi.conj().T))
    u = vecs[:, -1]
    j = int(np.argmax(np.abs(u) > 1e-12))
    u = u * (abs(u[j]) / u[j])
    return float(vals[-1]), u


def penalty_value(Psi: np.ndarray) -> float:
    return float(np.real(np.trace(Psi))) - principal_eigvec(Psi)[0]


def linearized_penalty(Psi: np.ndarray, Psi_hat: np.ndarray) -> float:
    lam, phi = principal_eigvec(Psi_hat)
    diff = Psi - Psi_hat
    return float(np.real(np.trace(Psi)) - lam - np.real(phi.conj() @ diff @ phi))


def extract_phases(Psi: np.ndarray) -> np.ndarray:
    if not np.any(Psi):
        raise DomainError("cannot extract phases from a zero matrix")
    _, u = principal_eigvec(Psi)
    head, last = u[:-1], u[-1]
    if abs(last) > 1e-12:
        ratio = head / last
    else:
        ratio = head
    return np.exp(1j * np.angle(ratio))


@dataclass
class PenaltyResult:
    Psi: np.ndarray
    iterations: int
    penalties: list[float] = field(default_factory=list)
    slacks: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    stalled: bool = False
    ok: bool = True


def solve_phase_penalty(
    rows: list[SdpRow],
    n: int,
    tau: float = 10.0,
    slack_weight: float = 1.0,
    max_iters: int = 20,
    penalty_tol: Optional[float] = None,
    tol: float = 1e-6,
    psi_init: Optional[np.ndarray] = None,
) -> PenaltyResult:
    """Penalized SDR iterations; the first solve is the plain relaxation unless ``psi_init`` is given."""
    penalty_tol = 1e-5 * n if penalty_tol is None else penalty_tol
    res = PenaltyResult(np.eye(n, dtype=complex), 0)
    if psi_init is None:
        sol = solve_phase_sdp(np.zeros((n, n)), rows, slack_weight, tol)
        res.iterations = 1
        res.statuses.append(sol.status.value)
        if not sol.ok:
            res.ok = False
            return res
        psi = sol.x
        res.slacks.append(sol.slack)
    else:
        psi = psi_init
    res.Psi = psi
    res.penalties.append(penalty_value(psi))
    rising = 0
    while res.penalties[-1] > penalty_tol and res.iterations < max_iters:
        _, phi = principal_eigvec(psi)
        C = tau * (np.eye(n) - np.outer(phi, phi.conj()))
        sol = solve_phase_sdp(C, rows, slack_weight, tol)
        res.iterations += 1
        res.statuses.append(sol.status.value)
        if not sol.ok:
            log.debug("penalty SDP %s at inner iteration %d", sol.status.value, res.iterations)
            break
        psi = sol.x
        res.Psi = psi
        res.slacks.append(sol.slack)
        res.penalties.append(penalty_value(psi))
        if res.penalties[-1] >= res.penalties[-2] - tol:
            rising += 1
            if rising >= 2:
                res.stalled = True
                break
        else:
            rising = 0
    return res


# -- surface updates -----------------------------------------------------

def harvest_row(ch: ChannelSet, ris: RisState, prec: Precoder, cfg: SystemConfig) -> Optional[SdpRow]:
    """Keep RIS2's harvest (which depends on theta1 through the cascade) at its requirement."""
    if cfg.mu == 0 or ch.N2 == 0 or ch.N1 == 0 or ris.beta1 == 0:
        return None
    split = cfg.eta * (1.0 - ris.beta2**2) * prec.power
    if split <= 0:
        return None
    need = (ch.N2 * cfg.mu / split - float(np.sum(np.abs(ch.H2) ** 2))) / ris.beta1**2
    if need <= 0:
        return None
    F = (ch.H1.conj().T @ ch.H1) * (ch.D.conj() @ ch.D.T)
    n = ch.N1 + 1
    A = np.zeros((n, n), complex)
    A[:-1, :-1] = F
    return SdpRow(A, need * (1 + ROW_MARGIN))


def lifted_slack(rows: list[SdpRow], theta: np.ndarray) -> float:
    """Common slack t that phases achieve in the SINR rows (the quantity the SDP maximizes)."""
    ext = np.append(theta, 1.0)
    Psi = np.outer(ext, ext.conj())
    return min((r.value(Psi) - r.rhs) / r.slack_coef for r in rows if r.slack_coef)


def _strictly_feasible(rep, ch: ChannelSet, cfg: SystemConfig) -> bool:
    # harvest margins sit at zero by construction of the amplitudes; allow rounding only
    slack1 = -HARVEST_ROUNDING * ch.N1 * cfg.mu
    slack2 = -HARVEST_ROUNDING * ch.N2 * cfg.mu
    return rep.min_sinr_margin >= 0 and rep.harvest1_margin >= slack1 and rep.harvest2_margin >= slack2


def optimize_theta(
    ch: ChannelSet, dc: DerivedChannels, ris: RisState, prec: Precoder, cfg: SystemConfig, side: int
) -> tuple[RisState, dict]:
    """One lifted update of theta1 (side=1) or theta2 (side=2).

    The new phases replace the old ones only if every constraint still holds
    and, with slack maximization on, the worst normalized SINR margin does
    not drop.
    """
    N = ch.N1 if side == 1 else ch.N2
    beta = ris.beta1 if side == 1 else ris.beta2
    record = {"side": side, "accepted": False, "iterations": 0, "penalty": 0.0, "stalled": False}
    if N == 0 or beta == 0:
        record["skipped"] = True
        return ris, record
    lift = SinrLift.build(dc, ris, prec, side)
    rows = lift.sinr_rows(cfg.gamma_bar, cfg.sigma2)
    if side == 1:
        extra = harvest_row(ch, ris, prec, cfg)
        if extra is not None:
            rows.append(extra)
    res = solve_phase_penalty(
        rows,
        lift.n,
        tau=cfg.tau,
        slack_weight=1.0 if cfg.phase_slack else 0.0,
        max_iters=cfg.penalty_max_iters,
        penalty_tol=cfg.penalty_rel_tol * lift.n,
        tol=cfg.sdp_tol,
    )
    record.update(
        iterations=res.iterations,
        penalty=res.penalties[-1] if res.penalties else float("nan"),
        penalties=res.penalties,
        stalled=res.stalled,
        statuses=res.statuses,
    )
    if not res.ok:
        return ris, record
    theta = extract_phases(res.Psi)
    new = ris.with_theta1(theta) if side == 1 else ris.with_theta2(theta)
    old_theta = ris.theta1 if side == 1 else ris.theta2
    before, after = lifted_slack(rows, old_theta), lifted_slack(rows, theta)
    accept = _strictly_feasible(check_constraints(ch, new, prec, cfg), ch, cfg)
    if accept and cfg.phase_slack:
        accept = after >= before
    record.update(accepted=bool(accept), slack_before=before, slack_after=after)
    return (new if accept else ris), record


def optimize_theta1(ch, dc, ris, prec, cfg):
    return optimize_theta(ch, dc, ris, prec, cfg, 1)


def optimize_theta2(ch, dc, ris, prec, cfg):
    return optimize_theta(ch, dc, ris, prec, cfg, 2)
