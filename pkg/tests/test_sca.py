import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cgauss, random_channels, unit_phases
from dualris.errors import DomainError, InfeasibleAtInit
from dualris.model import Precoder, RisState, check_constraints, joint_channels
from dualris.sca import (
    ScaSettings,
    feasibility_scale,
    initial_precoder,
    linearize_power,
    linearize_sinr,
    sca_loop,
)
from dualris.scenario import SystemConfig, feasible_defaults, synthesize_scenario


def test_settings_validation():
    assert ScaSettings().max_iters == 30 and ScaSettings().rel_obj_tol == 1e-4
    with pytest.raises(ValueError):
        ScaSettings(max_iters=0)
    with pytest.raises(ValueError):
        ScaSettings(rel_obj_tol=0.0)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_sinr_cut_is_exact_then_below(seed):
    rng = np.random.default_rng(seed)
    g, W0, W = cgauss(rng, 3), cgauss(rng, 3, 2), cgauss(rng, 3, 2)
    cut = linearize_sinr(g, W0, 1, 10.0, 1e-3)
    assert cut.lhs(W0) == pytest.approx(abs(g.conj() @ W0[:, 1]) ** 2, rel=1e-12, abs=1e-15)
    assert cut.lhs(W) <= abs(g.conj() @ W[:, 1]) ** 2 + 1e-12


def test_sinr_cut_at_zero_expansion_point(rng):
    g = cgauss(rng, 3)
    cut = linearize_sinr(g, np.zeros((3, 1)), 0, 10.0, 1e-3)
    for _ in range(5):
        assert cut.lhs(cgauss(rng, 3, 1)) == 0.0
    assert cut.rhs(cgauss(rng, 3, 1)) > 0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_power_cut_is_exact_then_below(seed):
    rng = np.random.default_rng(seed)
    W0, W = cgauss(rng, 3, 2), cgauss(rng, 3, 2)
    cut = linearize_power(W0, 0.0)
    assert cut.lhs(W0) == pytest.approx(np.sum(np.abs(W0) ** 2), rel=1e-12)
    assert cut.lhs(W) <= np.sum(np.abs(W) ** 2) + 1e-12


def single_user(rng, gamma_bar=100.0):
    cfg = SystemConfig(M=3, K=1, N1=4, N2=3, mu=0.0, gamma_bar=gamma_bar)
    ch = synthesize_scenario(cfg, int(rng.integers(1000)))
    ris = RisState(unit_phases(rng, 4), unit_phases(rng, 3), 1.0, 1.0)
    return cfg, ch, ris


@pytest.mark.parametrize("seed", range(5))
def test_single_user_reaches_closed_form(seed):
    cfg, ch, ris = single_user(np.random.default_rng(seed))
    g = joint_channels(ch, ris)[:, 0]
    w0 = Precoder(cgauss(np.random.default_rng(seed), 3, 1))
    w0 = w0.scaled(feasibility_scale(ch, ris, w0, cfg))
    res = sca_loop(ch, ris, cfg, w0=w0)
    target = cfg.gamma_bar * cfg.sigma2 / np.linalg.norm(g) ** 2
    assert res.precoder.power == pytest.approx(target, rel=1e-4)


def test_vanishing_target_vanishing_power(rng):
    powers = []
    for gb in (1e-2, 1e-4, 1e-6):
        cfg, ch, ris = single_user(np.random.default_rng(3), gamma_bar=gb)
        prec, _ = initial_precoder(ch, ris.theta1, ris.theta2, cfg)
        powers.append(sca_loop(ch, ris, cfg, w0=prec).precoder.power)
    assert powers[0] > powers[1] > powers[2]
    # with no harvest cost the minimum power is proportional to the target
    assert powers[2] / powers[0] == pytest.approx(1e-4, rel=1e-3)


def test_optimal_start_is_a_fixed_point(rng):
    cfg, ch, ris = single_user(rng)
    g = joint_channels(ch, ris)[:, 0]
    w = g[:, None] * np.sqrt(cfg.gamma_bar * cfg.sigma2) / np.linalg.norm(g) ** 2
    w0 = Precoder(w * (1 + 1e-12))
    res = sca_loop(ch, ris, cfg, w0=w0)
    assert res.iterations <= 2
    assert res.precoder.power == pytest.approx(w0.power, rel=1e-6)


def test_zero_beamformer_rejected(rng):
    cfg, ch, ris = single_user(rng)
    with pytest.raises(DomainError):
        sca_loop(ch, ris, cfg, w0=Precoder(np.zeros((3, 1), complex)))


@pytest.mark.parametrize("seed", range(4))
def test_iterates_feasible_and_monotone(seed):
    cfg = feasible_defaults(N1=6, N2=6)
    ch = synthesize_scenario(cfg, seed)
    rng = np.random.default_rng(seed)
    prec, ris = initial_precoder(ch, unit_phases(rng, 6), unit_phases(rng, 6), cfg)
    res = sca_loop(ch, ris, cfg, w0=prec)
    assert all(b <= a + cfg.solver_tol for a, b in zip(res.objective, res.objective[1:]))
    rep = check_constraints(ch, ris, res.precoder, cfg)
    assert rep.feasible(1e-6, cfg.gamma_bar)
    for row in res.rows:
        if "min_sinr_margin" in row:
            assert row["min_sinr_margin"] >= -1e-6 * cfg.gamma_bar
            assert row["harvest1_margin"] >= -1e-6 and row["harvest2_margin"] >= -1e-6


def test_init_rejects_unreachable_target(rng):
    cfg, ch, ris = single_user(rng, gamma_bar=1e30)
    with pytest.raises(InfeasibleAtInit):
        initial_precoder(ch, ris.theta1, ris.theta2, cfg)
