import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfisac.model import (Budgets, DesignPoint, check_feasibility, eve_sinr, fronthaul_rate_rx,
                          fronthaul_rate_tx, log2det, quantization_covariance, rx_covariance,
                          secrecy_rate, sensing_sinr, transmit_power, user_sinr)
from cfisac.scenario import complex_normal, draw_channels
from conftest import network_config


def design(ch, rng, scale=0.5, q_tx=0.05, q_rx=0.2):
    beam = scale * complex_normal(rng, (ch.n_tx * ch.n_antennas, ch.n_users))
    return DesignPoint(beam, np.full(ch.n_tx, q_tx), np.full(ch.n_rx, q_rx))


def test_design_point_shapes(ch):
    d = design(ch, np.random.default_rng(0))
    assert d.n_antennas == 2 and d.n_users == 2
    assert d.block(1).shape == (2, 2)
    with pytest.raises(ValueError):
        DesignPoint(np.zeros((5, 2)), np.ones(2), np.ones(2))


def test_budgets_validation():
    with pytest.raises(ValueError):
        Budgets(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        Budgets(1.0, 1.0, 1.0, -1.0)


def test_transmit_power_examples():
    d = DesignPoint(np.zeros((3, 1)), np.array([0.1]), np.array([1.0]))
    assert transmit_power(d, 0) == pytest.approx(0.3)
    w = np.array([[0.6], [0.8j]])
    assert transmit_power(DesignPoint(w, np.array([1e-15]), np.array([1.0])), 0) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        transmit_power(d, 1)


def test_sinr_examples(ch):
    rng = np.random.default_rng(1)
    d = design(ch, rng)
    zero_k = DesignPoint(np.column_stack([np.zeros(4), d.beam[:, 1]]), d.q_tx, d.q_rx)
    assert user_sinr(zero_k, ch, 0) == 0.0
    # single user, vanishing quantization, unit noise
    h = ch.h_users[:1]
    single = ch.replace(h_users=h, noise_user=np.array([1.0]))
    w = d.beam[:, :1]
    dd = DesignPoint(w, np.full(2, 1e-15), d.q_rx)
    assert user_sinr(dd, single, 0) == pytest.approx(abs(h[0].conj() @ w[:, 0]) ** 2, rel=1e-9)
    assert eve_sinr(d, ch.replace(h_eve=np.zeros(4)), 0) == 0.0
    # beam orthogonal to Eve's channel
    he = ch.h_eve
    proj = np.eye(4) - np.outer(he, he.conj()) / np.vdot(he, he).real
    ortho = DesignPoint(proj @ d.beam, d.q_tx, d.q_rx)
    assert eve_sinr(ortho, ch, 0) == pytest.approx(0.0, abs=1e-20)


def test_secrecy_examples(ch):
    d = design(ch, np.random.default_rng(2))
    no_eve = ch.replace(h_eve=np.zeros(4))
    expected = min(np.log2(1 + user_sinr(d, no_eve, k)) for k in range(2))
    assert secrecy_rate(d, no_eve) == pytest.approx(expected, rel=1e-12)
    # Eve shares user 0's channel and noise: the difference for user 0 is exactly 0
    twin = ch.replace(h_eve=ch.h_users[0].copy(), noise_eve=float(ch.noise_user[0]))
    assert secrecy_rate(d, twin) == 0.0


def test_min_before_floor(ch):
    # min over users is taken first; the floor at 0 applies only to the minimum
    d = design(ch, np.random.default_rng(3))
    diffs = [np.log2(1 + user_sinr(d, ch, k)) - np.log2(1 + eve_sinr(d, ch, k)) for k in range(2)]
    assert secrecy_rate(d, ch) == pytest.approx(max(min(diffs), 0.0), abs=1e-14)


def test_sensing_sinr_examples(ch):
    d = DesignPoint(np.zeros((4, 2)), np.full(2, 1e-300), np.full(2, 0.1))
    assert sensing_sinr(d, ch) == pytest.approx(0.0, abs=1e-200)
    same = ch.replace(g_sense=ch.c_clutter.copy())
    d2 = design(ch, np.random.default_rng(4), q_rx=1e-300)
    assert sensing_sinr(d2, same, noise=np.zeros(2)) == pytest.approx(1.0, rel=1e-12)


def test_fronthaul_tx_examples():
    assert fronthaul_rate_tx(DesignPoint(np.zeros((2, 1)), np.array([0.3]), np.array([1.0])), 0) == 0.0
    d = DesignPoint(np.array([[1.0 + 0j]]), np.array([1.0]), np.array([1.0]))
    assert fronthaul_rate_tx(d, 0) == pytest.approx(1.0)
    rng = np.random.default_rng(5)
    w = complex_normal(rng, (3, 2))
    a = fronthaul_rate_tx(DesignPoint(w, np.array([0.2]), np.array([1.0])), 0)
    b = fronthaul_rate_tx(DesignPoint(np.sqrt(3.7) * w, np.array([0.2 * 3.7]), np.array([1.0])), 0)
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(ValueError):
        fronthaul_rate_tx(DesignPoint(w, np.array([0.0]), np.array([1.0])), 0)


def test_fronthaul_rx_examples(ch):
    d = design(ch, np.random.default_rng(6))
    blank = ch.replace(g_sense=np.zeros_like(ch.g_sense), c_clutter=np.zeros_like(ch.c_clutter))
    expected = 2 * np.log2((0.1 + 0.2) / 0.2)
    assert fronthaul_rate_rx(d, blank, 0) == pytest.approx(expected, rel=1e-12)
    rates = [fronthaul_rate_rx(DesignPoint(d.beam, d.q_tx, np.full(2, q)), ch, 1) for q in (1, 10, 100)]
    assert rates[0] > rates[1] > rates[2] > 0
    with pytest.raises(ValueError):
        fronthaul_rate_rx(DesignPoint(d.beam, d.q_tx, np.array([0.1, -1.0])), ch, 1)


def test_log2det_rejects_indefinite():
    assert log2det(np.diag([2.0, 4.0])) == pytest.approx(3.0)
    with pytest.raises(np.linalg.LinAlgError):
        log2det(np.diag([1.0, -1.0]))


def test_quantization_covariance_blocks():
    q = quantization_covariance(np.array([0.1, 0.3]), 2)
    assert np.allclose(np.diag(q), [0.1, 0.1, 0.3, 0.3])


def test_rx_covariance_is_hermitian(ch):
    d = design(ch, np.random.default_rng(7))
    r = rx_covariance(d, ch, 0)
    assert np.allclose(r, r.conj().T)
    assert np.all(np.linalg.eigvalsh(r) >= 0.1 - 1e-12)


def test_check_feasibility_examples(ch):
    tiny = DesignPoint(np.zeros((4, 2)), np.full(2, 1e-9), np.full(2, 1.0))
    rep = check_feasibility(tiny, ch, Budgets(1.0, 4.0, 4.0, 0.0))
    assert rep.ok, str(rep)
    loud = design(ch, np.random.default_rng(8), scale=2.0)
    rep = check_feasibility(loud, ch, Budgets(1e-6, 100.0, 100.0, 0.0))
    assert not rep.ok
    assert {c.name for c in rep.failures} == {"power[0]", "power[1]"}
    assert all(c.slack < 0 for c in rep.failures)
    assert "FAIL" in str(rep)
    with pytest.raises(ValueError):
        check_feasibility(tiny, ch, Budgets(1.0, 4.0, 4.0, 0.0), tol=-1.0)


def test_check_feasibility_relative_slack(ch):
    tiny = DesignPoint(np.zeros((4, 2)), np.full(2, 0.5), np.full(2, 1.0))
    # power is exactly 1.0; a budget 1e-7 below passes at tol 1e-6 and fails at tol 0
    assert check_feasibility(tiny, ch, Budgets(1.0 - 1e-7, 4.0, 4.0, 0.0), tol=1e-6).ok
    assert not check_feasibility(tiny, ch, Budgets(1.0 - 1e-7, 4.0, 4.0, 0.0), tol=0.0).ok


# ----------------------------------------------------------------------------
# properties
# ----------------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)
variances = st.floats(1e-4, 10.0)
# hypothesis does not reset function-scoped fixtures, so the property tests share one draw
CH = draw_channels(network_config(), np.random.default_rng(7))


@given(seeds, variances, variances)
def test_rates_nonnegative(seed, q_tx, q_rx):
    d = design(CH, np.random.default_rng(seed), scale=np.random.default_rng(seed).uniform(0, 3),
               q_tx=q_tx, q_rx=q_rx)
    assert secrecy_rate(d, CH) >= 0
    for i in range(2):
        assert fronthaul_rate_tx(d, i) >= 0
    for j in range(2):
        assert fronthaul_rate_rx(d, CH, j) >= 0


@given(seeds, variances, st.floats(1e-3, 1e3))
def test_tx_rate_scale_invariance(seed, q, c):
    w = complex_normal(np.random.default_rng(seed), (2, 3))
    a = fronthaul_rate_tx(DesignPoint(w, np.array([q]), np.array([1.0])), 0)
    b = fronthaul_rate_tx(DesignPoint(np.sqrt(c) * w, np.array([c * q]), np.array([1.0])), 0)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@given(seeds, st.floats(1e-3, 10.0), st.floats(1.01, 10.0))
def test_sensing_sinr_decreasing_in_rx_quantization(seed, q, factor):
    d = design(CH, np.random.default_rng(seed), q_rx=q)
    for j in range(2):
        q_rx = d.q_rx.copy()
        q_rx[j] *= factor
        worse = DesignPoint(d.beam, d.q_tx, q_rx)
        assert sensing_sinr(worse, CH) < sensing_sinr(d, CH)
