"""Convex subproblem solvers.

Two families only: the convexified beamforming problem (a convex QCQP in
the real and imaginary parts of the precoder, solved with Clarabel through
cvxpy) and a linear SDP over a Hermitian PSD matrix with unit diagonal
(solved with CVXOPT on the real embedding). Every returned solution carries
a feasibility residual recomputed from the raw constraint data.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import cvxpy as cp
import numpy as np
from cvxopt import matrix, solvers

from .errors import DomainError


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class ConicSolution:
    x: Optional[np.ndarray]
    status: SolveStatus
    objective: float = float("nan")
    max_violation: float = float("inf")
    slack: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


# -- Hermitian <-> real symmetric -----------------------------------------

def hermitian_to_real_psd(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """[[Re A, -Im A], [Im A, Re A]]; PSD exactly when A is."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("need a square matrix")
    if np.max(np.abs(A - A.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise DomainError("matrix is not Hermitian")
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def real_psd_to_hermitian(X: np.ndarray) -> np.ndarray:
    """Inverse of the embedding; averages the two copies, so any real
    symmetric 2n x 2n solution is projected onto the embedded structure."""
    n = X.shape[0] // 2
    X11, X12, X21, X22 = X[:n, :n], X[:n, n:], X[n:, :n], X[n:, n:]
    return 0.5 * (X11 + X22) + 0.5j * (X21 - X12)


# -- beamforming subproblem -----------------------------------------------

@dataclass(frozen=True)
class SinrCut:
    """2 Re{w0^H g g^H w_k} - |g^H w0|^2 >= gamma (sum_{i!=k} |g^H w_i|^2 + sigma2)."""

    k: int
    g: np.ndarray
    w0: np.ndarray
    gamma: float
    sigma2: float

    @property
    def a(self) -> np.ndarray:
        return self.g * (self.g.conj() @ self.w0)

    @property
    def c(self) -> float:
        return float(abs(self.g.conj() @ self.w0) ** 2)

    def lhs(self, W: np.ndarray) -> float:
        return 2.0 * float(np.real(self.a.conj() @ W[:, self.k])) - self.c

    def rhs(self, W: np.ndarray) -> float:
        y = np.abs(self.g.conj() @ W) ** 2
        return self.gamma * (float(y.sum() - y[self.k]) + self.sigma2)

    def scale(self) -> float:
        return max(self.c, self.gamma * self.sigma2)


@dataclass(frozen=True)
class PowerCut:
    """sum_k 2 Re{w0_k^H w_k} - ||w0_k||^2 >= rhs."""

    W0: np.ndarray
    rhs: float

    def lhs(self, W: np.ndarray) -> float:
        return 2.0 * float(np.real(np.vdot(self.W0, W))) - float(np.sum(np.abs(self.W0) ** 2))

    def scale(self) -> float:
        return max(abs(self.rhs), float(np.sum(np.abs(self.W0) ** 2)), 1e-300)


def power_violation(W, sinr_cuts: Sequence[SinrCut], power_cuts: Sequence[PowerCut], p_max: float) -> float:
    """Largest scaled violation of the convexified beamforming constraints at W."""
    v = 0.0
    for cut in sinr_cuts:
        v = max(v, (cut.rhs(W) - cut.lhs(W)) / cut.scale())
    for cut in power_cuts:
        v = max(v, (cut.rhs - cut.lhs(W)) / cut.scale())
    v = max(v, (float(np.sum(np.abs(W) ** 2)) - p_max) / p_max)
    return v


def solve_power_subproblem(
    sinr_cuts: Sequence[SinrCut],
    power_cuts: Sequence[PowerCut],
    p_max: float,
    shape: tuple[int, int],
    tol: float = 1e-7,
) -> ConicSolution:
    """Minimize sum_k ||w_k||^2 subject to the cuts and the power budget."""
    M, K = shape
    ref = [np.sum(np.abs(c.W0) ** 2) for c in power_cuts]
    ref += [np.sum(np.abs(c.w0) ** 2) for c in sinr_cuts]
    s = max(max(ref, default=0.0), 1e-300)
    if not sinr_cuts and not power_cuts:
        return ConicSolution(np.zeros(shape, complex), SolveStatus.OPTIMAL, 0.0, 0.0)
    rs = np.sqrt(s)

    vr = cp.Variable((M, K))
    vi = cp.Variable((M, K))
    # the budget is not passed to the solver: the objective is the power
    # itself, so the cap binds only when the problem is infeasible
    cons = []
    for cut in sinr_cuts:
        nrm = cut.scale()
        a, g, k = cut.a, cut.g, cut.k
        lin = (2 * rs / nrm) * (a.real @ vr[:, k] + a.imag @ vi[:, k]) - (cut.c + cut.gamma * cut.sigma2) / nrm
        others = [i for i in range(K) if i != k]
        if others:
            coef = np.sqrt(cut.gamma * s / nrm)
            re = coef * (g.real @ vr[:, others] + g.imag @ vi[:, others])
            im = coef * (g.real @ vi[:, others] - g.imag @ vr[:, others])
            cons.append(cp.sum_squares(re) + cp.sum_squares(im) <= lin)
        else:
            cons.append(lin >= 0)
    for cut in power_cuts:
        nrm = cut.scale()
        W0 = cut.W0 / rs
        lin = (2 * s / nrm) * (cp.sum(cp.multiply(W0.real, vr)) + cp.sum(cp.multiply(W0.imag, vi)))
        cons.append(lin - (np.sum(np.abs(cut.W0) ** 2) + cut.rhs) / nrm >= 0)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(vr) + cp.sum_squares(vi)), cons)
    try:
        with warnings.catch_warnings():
            # accuracy is judged below from the raw constraint data
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10,
                       tol_infeas_abs=1e-10, tol_infeas_rel=1e-10)
    except cp.SolverError as exc:
        return ConicSolution(None, SolveStatus.NUMERICAL_FAILURE, info={"error": str(exc)})
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return ConicSolution(None, SolveStatus.INFEASIBLE, info={"solver_status": prob.status})
    if vr.value is None:
        return ConicSolution(None, SolveStatus.NUMERICAL_FAILURE, info={"solver_status": prob.status})
    W = rs * (vr.value + 1j * vi.value)
    if float(np.sum(np.abs(W) ** 2)) > p_max * (1 + tol):
        return ConicSolution(None, SolveStatus.INFEASIBLE, info={"solver_status": "over budget"})
    viol = max(0.0, power_violation(W, sinr_cuts, power_cuts, p_max))
    status = SolveStatus.OPTIMAL if viol <= tol else SolveStatus.NUMERICAL_FAILURE
    return ConicSolution(W, status, float(np.sum(np.abs(W) ** 2)), viol, info={"solver_status": prob.status})


# -- phase SDP ------------------------------------------------------------

@dataclass(frozen=True)
class SdpRow:
    """tr(A Psi) - slack_coef * t >= rhs."""

    A: np.ndarray
    rhs: float
    slack_coef: float = 0.0

    def value(self, Psi: np.ndarray) -> float:
        return float(np.real(np.sum(self.A * Psi.T)))


def sdp_violation(Psi, rows: Sequence[SdpRow], t: float = 0.0) -> float:
    """Scaled residual of unit diagonal, PSD and the trace rows at (Psi, t)."""
    Psi = 0.5 * (Psi + Psi.conj().T)
    v = float(np.max(np.abs(np.real(np.diag(Psi)) - 1.0)))
    v = max(v, -float(np.linalg.eigvalsh(Psi)[0]), -t)
    for r in rows:
        scale = max(np.linalg.norm(r.A), abs(r.rhs), 1e-300)
        v = max(v, (r.rhs + r.slack_coef * t - r.value(Psi)) / scale)
    return max(v, 0.0)


def solve_phase_sdp(
    C: np.ndarray,
    rows: Sequence[SdpRow],
    slack_weight: float = 0.0,
    tol: float = 1e-6,
) -> ConicSolution:
    """min tr(C Psi) - slack_weight * t  s.t. rows, diag(Psi) = 1, Psi >= 0, t >= 0.

    ``t`` only exists when ``slack_weight > 0`` and some row has a nonzero
    ``slack_coef``; otherwise it is fixed at zero.
    """
    n = C.shape[0]
    rows = list(rows)
    use_t = slack_weight > 0 and any(r.slack_coef != 0 for r in rows)
    nt = 1 if use_t else 0
    nl = nt + len(rows)
    n2 = 2 * n
    m = n + len(rows)

    Gl = np.zeros((nl, m))
    Gs = np.zeros((n2 * n2, m))
    rhs = np.empty(m)
    for i in range(n):
        Gs[i * n2 + i, i] = 1.0
        Gs[(n + i) * n2 + (n + i), i] = 1.0
        rhs[i] = 2.0
    for j, r in enumerate(rows):
        scale = max(np.linalg.norm(r.A), abs(r.rhs), 1e-300)
        col = n + j
        E = 0.5 * hermitian_to_real_psd(0.5 * (r.A + r.A.conj().T), tol=np.inf) / scale
        Gs[:, col] = E.ravel(order="F")
        if use_t:
            Gl[0, col] = -r.slack_coef / scale
        Gl[nt + j, col] = -1.0
        rhs[col] = r.rhs / scale
    hl = np.zeros(nl)
    if use_t:
        hl[0] = -slack_weight
    hs = 0.5 * hermitian_to_real_psd(0.5 * (C + C.conj().T), tol=np.inf)

    kwargs = dict(
        Gs=[matrix(Gs)],
        hs=[matrix(hs)],
        options={"show_progress": False, "abstol": 1e-9, "reltol": 1e-8, "feastol": 1e-9, "maxiters": 100},
    )
    if nl:
        kwargs.update(Gl=matrix(Gl), hl=matrix(hl))
    try:
        sol = solvers.sdp(matrix(-rhs), **kwargs)
    except (ArithmeticError, ValueError) as exc:
        return ConicSolution(None, SolveStatus.NUMERICAL_FAILURE, info={"error": str(exc)})
    status = sol["status"]
    if status == "dual infeasible":
        return ConicSolution(None, SolveStatus.INFEASIBLE, info={"solver_status": status})
    if sol["zs"] is None or status == "primal infeasible":
        return ConicSolution(None, SolveStatus.NUMERICAL_FAILURE, info={"solver_status": status})
    X = np.array(sol["zs"][0])
    Psi = real_psd_to_hermitian(0.5 * (X + X.T))
    t = float(np.array(sol["zl"])[0, 0]) if use_t else 0.0
    viol = sdp_violation(Psi, rows, t)
    obj = float(np.real(np.sum(C * Psi.T))) - slack_weight * t
    ok = viol <= tol
    return ConicSolution(
        Psi,
        SolveStatus.OPTIMAL if ok else SolveStatus.NUMERICAL_FAILURE,
        obj,
        viol,
        slack=t,
        info={"solver_status": status, "iterations": sol.get("iterations")},
    )
