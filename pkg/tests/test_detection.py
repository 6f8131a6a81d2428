import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfisac.detection import (CENTRALIZED, DISTRIBUTED, HypothesisPair, ROCCurve, detection_at_fa,
                              detection_curve, detection_statistics, distributed_decision,
                              hypothesis_covariances, llr_statistic, majority_threshold,
                              roc_from_statistics, sensing_accuracy, simulate_roc)
from cfisac.model import DesignPoint
from cfisac.scenario import complex_normal, draw_channels
from conftest import network_config

CH = draw_channels(network_config(), np.random.default_rng(7))


def make_design(ch=CH, seed=0, scale=1.0, q_rx=0.05):
    beam = scale * complex_normal(np.random.default_rng(seed), (ch.n_tx * ch.n_antennas, ch.n_users))
    return DesignPoint(beam, np.full(ch.n_tx, 0.05), np.full(ch.n_rx, q_rx))


def binomial_sigma(p, n):
    return math.sqrt(max(p * (1 - p), 1e-12) / n)


# ----------------------------------------------------------------------------
# covariances and LLR
# ----------------------------------------------------------------------------

def test_hypothesis_pair_validation():
    with pytest.raises(np.linalg.LinAlgError):
        HypothesisPair(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(ValueError):
        HypothesisPair(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        HypothesisPair(np.ones(3), np.ones(3))
    assert HypothesisPair(np.eye(3), 2 * np.eye(3)).dim == 3


def test_covariances_without_target_coincide():
    ch = CH.replace(g_sense=np.zeros_like(CH.g_sense))
    hyp = hypothesis_covariances(make_design(ch), ch)
    assert np.array_equal(hyp.sigma0, hyp.sigma1)


def test_local_covariance_is_block_of_stacked():
    d = make_design()
    full = hypothesis_covariances(d, CH, compressed=False)
    for j in range(2):
        loc = hypothesis_covariances(d, CH, mode=j, compressed=False)
        sl = slice(2 * j, 2 * j + 2)
        assert np.allclose(loc.sigma1, full.sigma1[sl, sl])
    comp = hypothesis_covariances(d, CH)
    assert np.allclose(comp.sigma0 - full.sigma0, 0.05 * np.eye(4))
    with pytest.raises(IndexError):
        hypothesis_covariances(d, CH, mode=5)


def test_llr_examples():
    hyp = HypothesisPair(np.eye(2), np.eye(2))
    r = complex_normal(np.random.default_rng(0), (7, 2))
    assert llr_statistic(r, hyp) == 0.0
    scalar = HypothesisPair(np.array([[1.0]]), np.array([[2.0]]))
    x = 0.7 - 1.1j
    assert llr_statistic([[x]], scalar) == pytest.approx(abs(x) ** 2 / 2 - math.log(2), rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 10))
def test_llr_additive_over_blocks(seed, m1, m2):
    rng = np.random.default_rng(seed)
    a, b = complex_normal(rng, (3, 3)), complex_normal(rng, (3, 3))
    hyp = HypothesisPair(a @ a.conj().T + np.eye(3), b @ b.conj().T + np.eye(3))
    r = complex_normal(rng, (m1 + m2, 3))
    whole = llr_statistic(r, hyp)
    parts = llr_statistic(r[:m1], hyp) + llr_statistic(r[m1:], hyp)
    assert whole == pytest.approx(parts, rel=1e-10, abs=1e-10)


def test_llr_mean_larger_under_target():
    s0, s1 = detection_statistics(make_design(), CH, n_trials=10_000, rng=np.random.default_rng(1))
    assert s1.mean() > s0.mean()


# ----------------------------------------------------------------------------
# ROC
# ----------------------------------------------------------------------------

def test_roc_is_monotone_step_from_origin_to_corner():
    roc = simulate_roc(make_design(), CH, n_trials=500, rng=np.random.default_rng(2))
    assert (roc.p_fa[0], roc.p_de[0]) == (0.0, 0.0)
    assert (roc.p_fa[-1], roc.p_de[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc.p_fa) >= 0) and np.all(np.diff(roc.p_de) >= 0)
    assert roc.n_trials == 500


def test_roc_without_target_is_diagonal():
    ch = CH.replace(g_sense=np.zeros_like(CH.g_sense))
    n = 10_000
    roc = simulate_roc(make_design(ch), ch, n_trials=n, rng=np.random.default_rng(3))
    grid = np.linspace(0.05, 0.95, 19)
    de = detection_curve(roc, grid)
    # both statistic samples are i.i.d. from one law: two-sample error of each proportion
    sig = np.array([math.sqrt(2) * binomial_sigma(p, n) for p in grid])
    assert np.all(np.abs(de - grid) <= 3 * sig + 1.0 / n)


def test_stronger_target_detects_better():
    d = make_design(scale=0.5)
    weak = detection_at_fa(simulate_roc(d, CH, n_trials=3000, rng=np.random.default_rng(4)), 0.1)
    ch100 = CH.replace(g_sense=10.0 * CH.g_sense)  # variance x100
    strong = detection_at_fa(simulate_roc(d, ch100, n_trials=3000, rng=np.random.default_rng(4)), 0.1)
    assert strong > weak


def test_roc_above_diagonal():
    n = 5000
    roc = simulate_roc(make_design(scale=0.5), CH, n_trials=n, rng=np.random.default_rng(5))
    grid = np.linspace(0.02, 0.98, 49)
    de = detection_curve(roc, grid)
    assert np.all(de >= grid - 3 * np.sqrt(2 * grid * (1 - grid) / n))


def test_roc_from_statistics_ties():
    roc = roc_from_statistics([0.0, 1.0], [1.0, 2.0])
    # thresholds 2, 1, 0 under "statistic >= threshold"
    assert np.allclose(roc.p_fa, [0.0, 0.0, 0.5, 1.0])
    assert np.allclose(roc.p_de, [0.0, 0.5, 1.0, 1.0])
    with pytest.raises(ValueError):
        roc_from_statistics([], [1.0])


def test_detection_at_fa_examples():
    diag = ROCCurve(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 1)
    assert detection_at_fa(diag, 0.1) == pytest.approx(0.1)
    perfect = ROCCurve(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 1)
    assert detection_at_fa(perfect, 0.1) == 1.0
    two = ROCCurve(np.array([0.05, 0.15]), np.array([0.4, 0.6]), 1)
    assert detection_at_fa(two, 0.1) == pytest.approx(0.5)
    # duplicate p_fa: the upper point of the vertical step is used
    step = ROCCurve(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.8, 1.0]), 1)
    assert detection_at_fa(step, 0.5) == pytest.approx(0.9)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            detection_at_fa(diag, bad)
    with pytest.raises(ValueError):
        detection_at_fa(ROCCurve(np.array([]), np.array([]), 0), 0.1)


def test_sensing_accuracy_examples():
    assert sensing_accuracy(1.0, 0.1) == pytest.approx(0.55)
    assert sensing_accuracy(0.1, 0.1) == pytest.approx(0.1)
    assert sensing_accuracy(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        sensing_accuracy(1.2, 0.1)


# ----------------------------------------------------------------------------
# distributed fusion
# ----------------------------------------------------------------------------

def test_distributed_decision_examples():
    thr = [0.0, 0.0]
    assert distributed_decision([1.0, 1.0], thr)
    assert not distributed_decision([-1.0, -1.0], thr)
    assert distributed_decision([1.0, -1.0], thr)  # tie at N_R = 2 counts as detection
    assert not distributed_decision([1.0, -1.0, -1.0], [0.0] * 3)
    assert [majority_threshold(n) for n in (1, 2, 3, 4)] == [1, 1, 2, 2]
    with pytest.raises(ValueError):
        distributed_decision([1.0], thr)


def test_single_receiver_fusion_matches_centralized():
    cfg = network_config(n_rx=1, rx_positions=((250.0, 0.0),))
    ch = draw_channels(cfg, np.random.default_rng(8))
    d = make_design(ch, q_rx=1e-12)  # compression negligible
    cen = simulate_roc(d, ch, mode=CENTRALIZED, n_trials=4000, rng=np.random.default_rng(9))
    dis = simulate_roc(d, ch, mode=DISTRIBUTED, n_trials=4000, rng=np.random.default_rng(9))
    for fa in (0.05, 0.1, 0.3):
        assert detection_at_fa(cen, fa) == pytest.approx(detection_at_fa(dis, fa), abs=2e-3)


def test_distributed_statistic_is_majority_vote():
    # thresholding the fused statistic at -alpha equals the vote of local tests at level alpha
    d = make_design()
    s0, s1 = detection_statistics(d, CH, mode=DISTRIBUTED, n_trials=400, rng=np.random.default_rng(10))
    assert np.all((s0 <= 0) & (s0 >= -1)) and np.all((s1 <= 0) & (s1 >= -1))
    roc = roc_from_statistics(s0, s1)
    assert roc.p_fa[-1] == 1.0


def test_unknown_mode():
    with pytest.raises(ValueError):
        detection_statistics(make_design(), CH, mode="hybrid", n_trials=2, rng=np.random.default_rng(0))


def test_determinism():
    d = make_design()
    for mode in (CENTRALIZED, DISTRIBUTED):
        a = simulate_roc(d, CH, mode=mode, n_trials=300, rng=np.random.default_rng(11))
        b = simulate_roc(d, CH, mode=mode, n_trials=300, rng=np.random.default_rng(11))
        assert a.p_fa.tobytes() == b.p_fa.tobytes() and a.p_de.tobytes() == b.p_de.tobytes()
