import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualris.errors import DomainError
from dualris.scenario import (
    SystemConfig,
    dbm_to_watts,
    distance,
    draw_channel,
    feasible_defaults,
    los_component,
    make_rng,
    parse_config,
    pathloss,
    steering,
    synthesize_scenario,
    watts_to_dbm,
)


@pytest.mark.parametrize("dbm, watts", [(40, 10.0), (0, 1e-3), (-110, 1e-14)])
def test_dbm_to_watts(dbm, watts):
    assert dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-12)
    assert watts_to_dbm(watts) == pytest.approx(dbm, abs=1e-9)


def test_pathloss_examples():
    assert pathloss(1.0, 3.6) == pytest.approx(1e-3, rel=1e-12)
    assert pathloss(7.3, 0.0) == pytest.approx(1e-3, rel=1e-12)
    assert pathloss(10.0, 2.0) == pytest.approx(1e-5, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_pathloss_rejects_nonpositive_distance(d):
    with pytest.raises(DomainError):
        pathloss(d, 2.0)


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.1, 5))
def test_pathloss_decreasing_in_distance(d1, d2, alpha):
    if d1 < d2 * (1 - 1e-9):
        assert pathloss(d1, alpha) > pathloss(d2, alpha)


@given(st.floats(1.01, 50), st.floats(0.0, 5), st.floats(0.0, 5))
def test_pathloss_decreasing_in_exponent(d, a1, a2):
    if a1 < a2 - 1e-9:
        assert pathloss(d, a1) > pathloss(d, a2)


def test_los_single_element_is_one():
    np.testing.assert_allclose(los_component((0, 0), (1, 1), 1, 1), [[1.0]])


@given(st.integers(1, 6), st.integers(1, 6), st.floats(-10, 10), st.floats(-10, 10))
def test_los_unit_modulus(rows, cols, x, y):
    if abs(x) + abs(y) < 1e-6:
        return
    L = los_component((0.0, 0.0), (x, y), rows, cols)
    assert L.shape == (rows, cols)
    np.testing.assert_allclose(np.abs(L), 1.0, atol=1e-12)


def test_steering_broadside():
    a = steering(2, 0.0)
    np.testing.assert_allclose(a / a[0], [1, 1], atol=1e-15)


def test_draw_channel_pure_los_when_nlos_forced_to_zero():
    rng = make_rng(0, 0)
    tx, rx = (0.0, 0.0), (2.0, 2.0)
    H = draw_channel(rng, tx, rx, 3, 4, 3.6, 5.0, nlos=np.zeros((3, 4)))
    expected = math.sqrt(pathloss(math.sqrt(8), 3.6)) * math.sqrt(5 / 6) * los_component(tx, rx, 3, 4)
    np.testing.assert_allclose(H, expected, rtol=1e-14, atol=0)


def test_draw_channel_second_moment_matches_pathloss():
    rng = make_rng(7, 0)
    pl = pathloss(3.0, 2.2)
    H = draw_channel(rng, (0, 0), (3, 0), 1000, 100, 2.2, 5.0)
    assert np.mean(np.abs(H) ** 2) == pytest.approx(pl, rel=0.02)


def test_draw_channel_same_seed_same_matrix():
    a = draw_channel(make_rng(3, 1), (0, 0), (1, 2), 4, 5, 2.2, 5.0)
    b = draw_channel(make_rng(3, 1), (0, 0), (1, 2), 4, 5, 2.2, 5.0)
    np.testing.assert_array_equal(a, b)


def test_synthesize_shapes_and_determinism():
    cfg = SystemConfig(N1=5, N2=3)
    a, b = synthesize_scenario(cfg, 2), synthesize_scenario(cfg, 2)
    assert (a.M, a.K, a.N1, a.N2) == (4, 4, 5, 3)
    assert a.D.shape == (5, 3) and a.h1.shape == (4, 5) and a.h2.shape == (4, 3)
    for name in ("H1", "H2", "D", "h1", "h2", "user_positions"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert all(np.isfinite(getattr(a, n)).all() for n in ("H1", "H2", "D", "h1", "h2"))
    c = synthesize_scenario(cfg, 3)
    assert not np.array_equal(a.H1, c.H1)


def test_synthesize_without_ris1():
    ch = synthesize_scenario(SystemConfig(N1=0, N2=4), 0)
    assert ch.H1.shape == (4, 0) and ch.D.shape == (0, 4) and ch.h1.shape == (4, 0)
    assert ch.H2.shape == (4, 4) and np.all(ch.H2 != 0)


def test_default_bs_ris1_distance():
    cfg = SystemConfig()
    assert distance(cfg.bs_pos, cfg.ris1_pos) == pytest.approx(math.sqrt(8), abs=1e-12)


def test_users_inside_disk():
    cfg = SystemConfig(N1=2, N2=2, K=50)
    ch = synthesize_scenario(cfg, 0)
    d = np.hypot(ch.user_positions[:, 0] - 6.0, ch.user_positions[:, 1])
    assert np.all(d <= 2.0)


def test_frobenius_mean_matches_pathloss():
    cfg = SystemConfig(N1=8, N2=2, K=1)
    pl = pathloss(math.sqrt(8), cfg.alpha_bs_ris1)
    vals = [np.sum(np.abs(synthesize_scenario(cfg, r).H1) ** 2) for r in range(400)]
    assert np.mean(vals) == pytest.approx(cfg.M * cfg.N1 * pl, rel=0.02)


def test_config_defaults_and_validation():
    cfg = SystemConfig()
    assert (cfg.M, cfg.K, cfg.eta, cfg.mu, cfg.p_max, cfg.sigma2, cfg.tau, cfg.kappa) == (
        4, 4, 0.8, 1e-3, 10.0, 1e-14, 10.0, 5.0)
    assert cfg.gamma_bar == 100.0 and cfg.epsilon == pytest.approx(1e-3)
    assert feasible_defaults().mu == 1e-4
    for bad in (dict(M=0), dict(N1=0, N2=0), dict(eta=0.0), dict(eta=1.5), dict(mu=-1.0),
                dict(sigma2=0.0), dict(tau=0.0), dict(i_max=-1)):
        with pytest.raises(DomainError):
            SystemConfig(**bad)


def test_parse_config_units():
    cfg = parse_config("""
        # comment
        N1 = 12
        mu = 0.1 mW
        p_max = 40 dBm
        sigma2 = -110dBm
        gamma_bar = 20 dB
        ris2_pos = 5, 1
        eps = none
    """)
    assert cfg.N1 == 12 and cfg.mu == pytest.approx(1e-4)
    assert cfg.p_max == pytest.approx(10.0) and cfg.sigma2 == pytest.approx(1e-14)
    assert cfg.gamma_bar == pytest.approx(100.0) and cfg.ris2_pos == (5.0, 1.0) and cfg.eps is None


@pytest.mark.parametrize("text", ["N1 12", "bogus = 1", "mu = 0.1"])
def test_parse_config_rejects(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_digest_changes_with_any_field():
    import dataclasses

    base = SystemConfig()
    seen = {base.digest()}
    for f in dataclasses.fields(SystemConfig):
        v = getattr(base, f.name)
        if isinstance(v, bool):
            new = not v
        elif isinstance(v, int):
            new = v + 1
        elif isinstance(v, float):
            new = v * 0.5
        elif isinstance(v, tuple):
            new = (v[0] + 0.25, v[1])
        else:
            new = 0.5
        d = base.replace(**{f.name: new}).digest()
        assert d not in seen, f.name
        seen.add(d)
