"""Closed-form evaluators of the system model: power, SINRs, secrecy rate,
sensing SINR, fronthaul rates and a feasibility checker.

All rates are in bits per symbol (log base 2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelSet, ScenarioConfig


@dataclass(frozen=True)
class DesignPoint:
    """Beamformers plus transmit/receive quantization noise variances.

    ``beam`` is (N_T*N_A, K) with column k the stacked beamformer of user k.
    ``fusion`` records how the design is meant to be sensed
    ("centralized" or "distributed").
    """

    beam: np.ndarray
    q_tx: np.ndarray
    q_rx: np.ndarray
    fusion: str = "centralized"

    def __post_init__(self):
        object.__setattr__(self, "beam", np.asarray(self.beam, dtype=complex))
        object.__setattr__(self, "q_tx", np.asarray(self.q_tx, dtype=float))
        object.__setattr__(self, "q_rx", np.asarray(self.q_rx, dtype=float))
        if self.beam.ndim != 2 or self.beam.shape[0] % len(self.q_tx):
            raise ValueError("beam rows must split evenly across the Tx-RRHs")

    @property
    def n_antennas(self) -> int:
        return self.beam.shape[0] // len(self.q_tx)

    @property
    def n_users(self) -> int:
        return self.beam.shape[1]

    def block(self, i: int) -> np.ndarray:
        na = self.n_antennas
        return self.beam[i * na:(i + 1) * na]


@dataclass(frozen=True)
class Budgets:
    power: float
    cap_tx: float
    cap_rx: float
    secrecy_floor: float

    def __post_init__(self):
        if not (self.power > 0 and self.cap_tx > 0 and self.cap_rx > 0):
            raise ValueError("power and fronthaul budgets must be > 0")
        if self.secrecy_floor < 0:
            raise ValueError("secrecy_floor must be >= 0")

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "Budgets":
        return cls(config.power_budget, config.cap_tx, config.cap_rx, config.secrecy_floor)


def log2det(x: np.ndarray) -> float:
    sign, logabs = np.linalg.slogdet(x)
    if sign.real <= 0:
        raise np.linalg.LinAlgError("log-determinant of a non positive-definite matrix")
    return float(logabs / np.log(2.0))


def quantization_covariance(q: np.ndarray, n_antennas: int) -> np.ndarray:
    """Block-diagonal assembly of per-RRH scaled identities."""
    return np.diag(np.repeat(np.asarray(q, dtype=float), n_antennas)).astype(complex)


def transmit_covariance(design: DesignPoint) -> np.ndarray:
    """WW^H + Q^TX, the covariance of the stacked transmitted signal."""
    w = design.beam
    return w @ w.conj().T + quantization_covariance(design.q_tx, design.n_antennas)


def _quad(h: np.ndarray, a: np.ndarray) -> float:
    return float(np.real(h.conj() @ a @ h))


def transmit_power(design: DesignPoint, i: int) -> float:
    if not 0 <= i < len(design.q_tx):
        raise IndexError(f"Tx-RRH index {i} out of range")
    wi = design.block(i)
    return float(np.real(np.vdot(wi, wi))) + design.n_antennas * float(design.q_tx[i])


def _sinr(h, design, k, noise):
    w = design.beam
    gains = np.abs(h.conj() @ w) ** 2
    q = quantization_covariance(design.q_tx, design.n_antennas)
    interference = gains.sum() - gains[k] + _quad(h, q) + noise
    return float(gains[k] / interference)


def user_sinr(design: DesignPoint, ch: ChannelSet, k: int) -> float:
    return _sinr(ch.h_users[k], design, k, ch.noise_user[k])


def eve_sinr(design: DesignPoint, ch: ChannelSet, k: int) -> float:
    """SINR of user k's stream leaked to the eavesdropper."""
    return _sinr(ch.h_eve, design, k, ch.noise_eve)


def secrecy_rate(design: DesignPoint, ch: ChannelSet) -> float:
    """Worst-case secrecy rate: the minimum is taken before flooring at 0."""
    diffs = [np.log2(1 + user_sinr(design, ch, k)) - np.log2(1 + eve_sinr(design, ch, k))
             for k in range(design.n_users)]
    return max(float(min(diffs)), 0.0)


def sensing_sinr(design: DesignPoint, ch: ChannelSet, noise=None) -> float:
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    s = transmit_covariance(design)
    na = ch.n_antennas
    num = float(np.real(np.trace(ch.g_sense @ s @ ch.g_sense.conj().T)))
    den = (float(np.real(np.trace(ch.c_clutter @ s @ ch.c_clutter.conj().T)))
           + na * float(np.sum(noise)) + na * float(np.sum(design.q_rx)))
    return num / den


def fronthaul_rate_tx(design: DesignPoint, i: int) -> float:
    q = float(design.q_tx[i])
    if q <= 0:
        raise ValueError("transmit quantization variance must be > 0")
    wi = design.block(i)
    na = design.n_antennas
    return max(log2det(wi @ wi.conj().T + q * np.eye(na)) - na * np.log2(q), 0.0)


def rx_covariance(design: DesignPoint, ch: ChannelSet, j: int, noise=None) -> np.ndarray:
    """E[r_j r_j^H], the uncompressed covariance at Rx-RRH j."""
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    m = ch.g_block_row(j) + ch.c_block_row(j)
    return m @ transmit_covariance(design) @ m.conj().T + noise[j] * np.eye(ch.n_antennas)


def fronthaul_rate_rx(design: DesignPoint, ch: ChannelSet, j: int, noise=None) -> float:
    q = float(design.q_rx[j])
    if q <= 0:
        raise ValueError("receive quantization variance must be > 0")
    na = ch.n_antennas
    cov = rx_covariance(design, ch, j, noise) + q * np.eye(na)
    return max(log2det(cov) - na * np.log2(q), 0.0)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    value: float
    bound: float
    sense: str  # "<=" or ">="
    ok: bool

    @property
    def slack(self) -> float:
        return self.bound - self.value if self.sense == "<=" else self.value - self.bound


@dataclass(frozen=True)
class FeasibilityReport:
    checks: list[ConstraintCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if not c.ok]

    def __str__(self):
        lines = [f"{c.name:>12s} {c.value:12.6g} {c.sense} {c.bound:<12.6g} {'ok' if c.ok else 'FAIL'}"
                 for c in self.checks]
        return "\n".join(lines)


def _check(name, value, bound, sense, tol):
    scale = max(abs(bound), 1.0)
    if sense == "<=":
        ok = value <= bound + tol * scale
    else:
        ok = value >= bound - tol * scale
    return ConstraintCheck(name, float(value), float(bound), sense, bool(ok))


def check_feasibility(design: DesignPoint, ch: ChannelSet, budgets: Budgets,
                      tol: float = 1e-6) -> FeasibilityReport:
    """Evaluate the secrecy, fronthaul and power constraints.

    A constraint passes when violated by at most ``tol * max(|bound|, 1)``.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    checks = [_check("secrecy", secrecy_rate(design, ch), budgets.secrecy_floor, ">=", tol)]
    for i in range(len(design.q_tx)):
        checks.append(_check(f"fronthaul_tx[{i}]", fronthaul_rate_tx(design, i),
                             budgets.cap_tx, "<=", tol))
    for j in range(len(design.q_rx)):
        checks.append(_check(f"fronthaul_rx[{j}]", fronthaul_rate_rx(design, ch, j),
                             budgets.cap_rx, "<=", tol))
    for i in range(len(design.q_tx)):
        checks.append(_check(f"power[{i}]", transmit_power(design, i), budgets.power, "<=", tol))
    return FeasibilityReport(checks)
