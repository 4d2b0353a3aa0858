import json
import math

import numpy as np
import pytest

from dualris.bcd import (
    CONVERGED,
    INSUFFICIENT_HARVEST,
    MAX_ITERS,
    bcd_solve,
    solve_baseline,
)
from dualris.model import check_constraints, joint_channels
from dualris.scenario import SystemConfig, feasible_defaults, synthesize_scenario


def lossless(**changes):
    # with no harvest cost the achieved power is far below 1e-4 * p_max,
    # so the stop threshold is set relative to it
    return SystemConfig(M=3, K=2, N1=4, N2=4, mu=0.0, eps=1e-9, i_max=8).replace(**changes)


@pytest.fixture(scope="module")
def lossless_run():
    cfg = lossless()
    ch = synthesize_scenario(cfg, 0)
    return cfg, ch, bcd_solve(ch, cfg, 0)


def test_trace_monotone_and_final_point_feasible(lossless_run):
    cfg, ch, res = lossless_run
    assert res.trace.status in (CONVERGED, MAX_ITERS)
    p = res.trace.powers
    assert all(b <= a + cfg.solver_tol for a, b in zip(p, p[1:]))
    assert p[-1] < p[0]
    assert check_constraints(ch, res.ris, res.precoder, cfg).feasible(cfg.solver_tol, cfg.gamma_bar)


def test_power_above_single_user_bound(lossless_run):
    cfg, ch, res = lossless_run
    G = joint_channels(ch, res.ris)
    bound = max(cfg.gamma_bar * cfg.sigma2 / np.linalg.norm(G[:, k]) ** 2 for k in range(ch.K))
    assert res.power >= bound


def test_deterministic(lossless_run):
    cfg, ch, res = lossless_run
    again = bcd_solve(synthesize_scenario(cfg, 0), cfg, 0)
    assert again.trace.to_jsonl() == res.trace.to_jsonl()
    np.testing.assert_array_equal(again.precoder.w, res.precoder.w)


def test_double_mode_is_plain_solve(lossless_run):
    cfg, ch, res = lossless_run
    base = solve_baseline(ch, cfg, "double", 0)
    assert base.trace.to_jsonl() == res.trace.to_jsonl()


def test_phase_optimization_does_not_lose(lossless_run):
    cfg, ch, res = lossless_run
    frozen = solve_baseline(ch, cfg, "random_phase", 0)
    assert frozen.trace.phase_updates == 0
    assert all(r.get("phase_updates", 0) == 0 for r in frozen.trace.records)
    assert res.power <= frozen.power + cfg.solver_tol


def test_infinite_threshold_stops_after_one_iteration():
    cfg = lossless(eps=math.inf)
    res = bcd_solve(synthesize_scenario(cfg, 1), cfg, 1)
    assert res.trace.status == CONVERGED and res.trace.outer_iterations == 1


def test_zero_iterations_returns_initialization():
    cfg = lossless(i_max=0)
    res = bcd_solve(synthesize_scenario(cfg, 1), cfg, 1)
    assert res.trace.status == MAX_ITERS and len(res.trace.records) == 1


def test_reference_defaults_report_harvest_shortfall():
    cfg = SystemConfig(N1=50, N2=2, i_max=1)
    res = bcd_solve(synthesize_scenario(cfg, 0), cfg, 0)
    assert res.trace.status == INSUFFICIENT_HARVEST
    assert res.trace.shortfall > 0 and math.isnan(res.power)


def test_feasible_defaults_converge_at_harvest_floor():
    cfg = feasible_defaults(N1=6, N2=6, i_max=4)
    ch = synthesize_scenario(cfg, 0)
    res = bcd_solve(ch, cfg, 0)
    assert res.trace.ok
    rep = check_constraints(ch, res.ris, res.precoder, cfg)
    assert rep.feasible(cfg.solver_tol, cfg.gamma_bar)
    floor = ch.N1 * cfg.mu / (cfg.eta * np.sum(np.abs(ch.H1) ** 2))
    assert res.power >= floor * (1 - 1e-9)


def test_single_surface_baselines_drop_a_surface():
    cfg = lossless(i_max=2)
    ch = synthesize_scenario(cfg, 0)
    bs = solve_baseline(ch, cfg, "single_bs", 0)
    user = solve_baseline(ch, cfg, "single_user", 0)
    assert bs.ris.theta2.shape == (0,) and bs.ris.beta2 == 0.0
    assert user.ris.theta1.shape == (0,) and user.ris.beta1 == 0.0
    with pytest.raises(ValueError):
        solve_baseline(ch, cfg, "nonsense", 0)


def test_trace_jsonl_lines(lossless_run):
    _, _, res = lossless_run
    lines = res.trace.to_jsonl().splitlines()
    rows = [json.loads(x) for x in lines]
    assert len(rows) == len(res.trace.records) + 1
    assert rows[-1]["status"] == res.trace.status
    assert {"i", "power", "beta1", "beta2", "min_sinr_margin", "harvest1_margin", "harvest2_margin"} <= set(rows[1])
    assert {"S1", "S2", "O", "rejections", "stalls"} <= set(rows[1])
