"""Monte Carlo target detection at the central unit.

Under either hypothesis the (compressed) sensing observation is zero-mean
complex Gaussian, so the optimum Neyman-Pearson test is the quadratic
log-likelihood ratio between the two covariances. ROC curves come from
sweeping a threshold over the pooled statistics of H0 and H1 trials.

Distributed sensing: every Rx-RRH runs the same test on its own
uncompressed observation and the CU takes a majority vote. All local
detectors share one false-alarm level, which is what gets swept.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DesignPoint, transmit_covariance
from .scenario import ChannelSet, complex_normal

CENTRALIZED = "centralized"
DISTRIBUTED = "distributed"


@dataclass(frozen=True)
class HypothesisPair:
    """Observation covariances without (sigma0) and with (sigma1) the target."""

    sigma0: np.ndarray
    sigma1: np.ndarray

    def __post_init__(self):
        for name in ("sigma0", "sigma1"):
            x = np.asarray(getattr(self, name), dtype=complex)
            if x.ndim != 2 or x.shape[0] != x.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            x = 0.5 * (x + x.conj().T)
            np.linalg.cholesky(x)  # raises LinAlgError unless PD
            object.__setattr__(self, name, x)
        if self.sigma0.shape != self.sigma1.shape:
            raise ValueError("sigma0 and sigma1 must have equal shapes")

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]


@dataclass(frozen=True)
class ROCCurve:
    p_fa: np.ndarray
    p_de: np.ndarray
    n_trials: int

    def __post_init__(self):
        fa = np.asarray(self.p_fa, dtype=float)
        de = np.asarray(self.p_de, dtype=float)
        if fa.shape != de.shape or fa.ndim != 1:
            raise ValueError("p_fa and p_de must be 1-D arrays of equal length")
        object.__setattr__(self, "p_fa", fa)
        object.__setattr__(self, "p_de", de)

    def __len__(self):
        return len(self.p_fa)


def _noise_vector(noise, ch: ChannelSet) -> np.ndarray:
    return ch.noise_rx if noise is None else np.asarray(noise, dtype=float)


def _rows(ch: ChannelSet, rx):
    """Row indices of the stacked observation seen by ``rx`` (None = all)."""
    na = ch.n_antennas
    if rx is None:
        return np.arange(ch.n_rx * na)
    if not 0 <= rx < ch.n_rx:
        raise IndexError(f"Rx-RRH index {rx} out of range")
    return np.arange(rx * na, (rx + 1) * na)


def hypothesis_covariances(design: DesignPoint, ch: ChannelSet, noise=None,
                           mode=CENTRALIZED, compressed: bool = True) -> HypothesisPair:
    """Covariances of the observation under H0 and H1.

    ``mode`` is "centralized" (all Rx-RRHs stacked) or an Rx-RRH index for
    a local detector. ``compressed`` adds the receive quantization noise;
    local detectors in the distributed baseline work uncompressed.
    """
    rx = None if mode == CENTRALIZED else int(mode)
    rows = _rows(ch, rx)
    noise = _noise_vector(noise, ch)
    na = ch.n_antennas
    floor = noise + (design.q_rx if compressed else 0.0)
    diag = np.repeat(floor, na)[rows]
    s = transmit_covariance(design)
    g = ch.g_sense[rows]
    c = ch.c_clutter[rows]
    sigma0 = c @ s @ c.conj().T + np.diag(diag)
    m = g + c
    sigma1 = m @ s @ m.conj().T + np.diag(diag)
    return HypothesisPair(sigma0, sigma1)


def _logdet(x):
    return float(np.linalg.slogdet(x)[1])


def llr_weights(hyp: HypothesisPair):
    """(A, b) with statistic = sum_m r_m^H A r_m + M b (natural log)."""
    a = np.linalg.inv(hyp.sigma0) - np.linalg.inv(hyp.sigma1)
    a = 0.5 * (a + a.conj().T)
    return a, _logdet(hyp.sigma0) - _logdet(hyp.sigma1)


def llr_statistic(samples, hyp: HypothesisPair) -> float:
    """Exact log-likelihood ratio of M zero-mean complex Gaussian samples.

    ``samples`` is (M, d), one observation vector per row.
    """
    r = np.atleast_2d(np.asarray(samples, dtype=complex))
    a, b = llr_weights(hyp)
    quad = np.einsum("md,de,me->", r.conj(), a, r).real
    return float(quad + r.shape[0] * b)


def _batch_llr(r, a, b):
    # r: (trials, M, d)
    return np.einsum("tmd,de,tme->t", r.conj(), a, r).real + r.shape[1] * b


def _psd_root(x):
    lam, u = np.linalg.eigh(0.5 * (x + x.conj().T))
    return u * np.sqrt(np.clip(lam, 0.0, None))


def simulate_observations(design: DesignPoint, ch: ChannelSet, noise, n_trials: int,
                          n_symbols: int, rng: np.random.Generator, target: bool):
    """Stacked observations (uncompressed, compressed), each (trials, M, N_R*N_A).

    Symbols (including transmit quantization noise), receiver noise and
    receive quantization noise are redrawn for every symbol; the channels
    stay fixed.
    """
    noise = _noise_vector(noise, ch)
    na = ch.n_antennas
    root = _psd_root(transmit_covariance(design))
    x = complex_normal(rng, (n_trials, n_symbols, root.shape[1])) @ root.T
    m = ch.g_sense + ch.c_clutter if target else ch.c_clutter
    r = x @ m.T
    r = r + complex_normal(rng, r.shape) * np.sqrt(np.repeat(noise, na))
    q = complex_normal(rng, r.shape) * np.sqrt(np.repeat(design.q_rx, na))
    return r, r + q


def roc_from_statistics(stat0, stat1) -> ROCCurve:
    """Empirical ROC of the rule "decide H1 when statistic >= threshold".

    Thresholds run over every pooled statistic value, so the curve is the
    full step function from (0, 0) to (1, 1).
    """
    s0 = np.sort(np.asarray(stat0, dtype=float))
    s1 = np.sort(np.asarray(stat1, dtype=float))
    if len(s0) == 0 or len(s1) == 0:
        raise ValueError("need at least one trial per hypothesis")
    thresholds = np.unique(np.concatenate([s0, s1]))[::-1]
    fa = (len(s0) - np.searchsorted(s0, thresholds, side="left")) / len(s0)
    de = (len(s1) - np.searchsorted(s1, thresholds, side="left")) / len(s1)
    return ROCCurve(np.concatenate([[0.0], fa]), np.concatenate([[0.0], de]),
                    min(len(s0), len(s1)))


def _local_pvalues(stat0, stat):
    """Fraction of H0 local statistics at or above each entry of ``stat``."""
    s0 = np.sort(stat0)
    return (len(s0) - np.searchsorted(s0, stat, side="left")) / len(s0)


def majority_threshold(n_rx: int) -> int:
    return (n_rx + 1) // 2


def distributed_decision(local_llrs, thresholds) -> bool:
    """Majority vote: detect when at least ceil(N_R/2) local tests fire."""
    llr = np.asarray(local_llrs, dtype=float)
    thr = np.asarray(thresholds, dtype=float)
    if llr.shape != thr.shape:
        raise ValueError("local_llrs and thresholds must have equal lengths")
    return int(np.count_nonzero(llr > thr)) >= majority_threshold(llr.size)


def detection_statistics(design: DesignPoint, ch: ChannelSet, noise=None, mode=CENTRALIZED,
                         n_trials: int = 5000, rng=None, n_symbols: int = 30):
    """Per-trial decision statistics under H0 and H1 (larger means target).

    Centralized: the LLR of the compressed stacked observation. Distributed:
    minus the ceil(N_R/2)-th smallest local p-value, so that thresholding it
    at -alpha is the majority vote of local tests at common level alpha.
    """
    if n_trials < 1 or n_symbols < 1:
        raise ValueError("n_trials and n_symbols must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    r0, r0c = simulate_observations(design, ch, noise, n_trials, n_symbols, rng, target=False)
    r1, r1c = simulate_observations(design, ch, noise, n_trials, n_symbols, rng, target=True)
    if mode == CENTRALIZED:
        a, b = llr_weights(hypothesis_covariances(design, ch, noise, CENTRALIZED))
        return _batch_llr(r0c, a, b), _batch_llr(r1c, a, b)
    if mode != DISTRIBUTED:
        raise ValueError(f"unknown detection mode {mode!r}")
    na = ch.n_antennas
    p0 = np.empty((n_trials, ch.n_rx))
    p1 = np.empty((n_trials, ch.n_rx))
    for j in range(ch.n_rx):
        a, b = llr_weights(hypothesis_covariances(design, ch, noise, j, compressed=False))
        sl = slice(j * na, (j + 1) * na)
        l0 = _batch_llr(r0[..., sl], a, b)
        l1 = _batch_llr(r1[..., sl], a, b)
        p0[:, j] = _local_pvalues(l0, l0)
        p1[:, j] = _local_pvalues(l0, l1)
    k = majority_threshold(ch.n_rx) - 1
    return -np.sort(p0, axis=1)[:, k], -np.sort(p1, axis=1)[:, k]


def simulate_roc(design: DesignPoint, ch: ChannelSet, noise=None, mode=CENTRALIZED,
                 n_trials: int = 5000, rng=None, n_symbols: int = 30) -> ROCCurve:
    """Empirical ROC from ``n_trials`` H0 and ``n_trials`` H1 trials of M symbols."""
    return roc_from_statistics(*detection_statistics(design, ch, noise, mode, n_trials,
                                                     rng, n_symbols))


def detection_curve(roc: ROCCurve, fa_grid) -> np.ndarray:
    """Detection probability interpolated on ``fa_grid`` (upper envelope at ties)."""
    if len(roc) == 0:
        raise ValueError("empty ROC curve")
    fa, idx = np.unique(roc.p_fa, return_inverse=True)
    de = np.full(len(fa), -np.inf)
    np.maximum.at(de, idx, roc.p_de)
    return np.interp(np.asarray(fa_grid, dtype=float), fa, de)


def detection_at_fa(roc: ROCCurve, target_fa: float) -> float:
    """Detection probability at ``target_fa`` by linear interpolation."""
    if not 0 < target_fa < 1:
        raise ValueError("target_fa must lie in (0, 1)")
    return float(detection_curve(roc, [target_fa])[0])


def sensing_accuracy(p_de: float, p_fa: float) -> float:
    """(p_de + p_fa) / 2, kept exactly in the published form."""
    for v in (p_de, p_fa):
        if not 0 <= v <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
    return 0.5 * (p_de + p_fa)
