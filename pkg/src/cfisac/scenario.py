"""Geometry-driven channel realizations for the cell-free ISAC network.

Angles follow one global convention: every ULA is broadside along +y and
an angle is measured from +y toward +x, so a point straight ahead sits at 0
and a point on the +x axis at pi/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised for degenerate geometry (e.g. coincident points)."""


@dataclass(frozen=True)
class Square:
    """Axis-aligned square region; ``side == 0`` pins a fixed point."""

    center: tuple[float, float]
    side: float

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        offset = rng.uniform(-0.5, 0.5, size=2) * self.side
        return np.asarray(self.center, dtype=float) + offset


@dataclass(frozen=True)
class ScenarioConfig:
    n_tx: int
    n_rx: int
    n_users: int
    n_antennas: int
    tx_positions: tuple[tuple[float, float], ...]
    rx_positions: tuple[tuple[float, float], ...]
    user_regions: tuple[Square, ...]
    eve_region: Square
    rician_factor: float = 5.0
    var_scatter: float = 1e-3
    var_clutter: float = 1e-3
    var_noise_user: float = 0.1
    var_noise_eve: float = 0.1
    var_noise_rx: float = 0.1
    power_budget: float = 6.0
    cap_tx: float = 4.0
    cap_rx: float = 4.0
    secrecy_floor: float = 0.5
    n_symbols: int = 30
    seed: int = 0

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_users", "n_antennas", "n_symbols"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if len(self.tx_positions) != self.n_tx:
            raise ValueError("tx_positions must have n_tx entries")
        if len(self.rx_positions) != self.n_rx:
            raise ValueError("rx_positions must have n_rx entries")
        if len(self.user_regions) != self.n_users:
            raise ValueError("user_regions must have n_users entries")
        # var_scatter == 0 is allowed: it switches the target off (G = 0)
        if self.var_scatter < 0:
            raise ValueError("var_scatter must be >= 0")
        for name in ("var_clutter", "var_noise_user", "var_noise_eve", "var_noise_rx",
                     "power_budget", "cap_tx", "cap_rx"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        if self.secrecy_floor < 0:
            raise ValueError("secrecy_floor must be >= 0")

    @property
    def n_tx_antennas(self) -> int:
        return self.n_tx * self.n_antennas

    @property
    def n_rx_antennas(self) -> int:
        return self.n_rx * self.n_antennas


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every channel in the network.

    Vectors and matrices are stacked over RRHs: ``h_users`` is (K, N_T*N_A),
    ``g_sense`` and ``c_clutter`` are (N_R*N_A, N_T*N_A). Noise variances ride
    along so evaluators need only (design, channels).
    """

    h_users: np.ndarray
    h_eve: np.ndarray
    g_sense: np.ndarray
    c_clutter: np.ndarray
    n_antennas: int
    noise_user: np.ndarray
    noise_eve: float
    noise_rx: np.ndarray
    aod: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aoa: np.ndarray = field(default_factory=lambda: np.zeros(0))
    user_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    eve_position: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def n_users(self) -> int:
        return self.h_users.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h_users.shape[1] // self.n_antennas

    @property
    def n_rx(self) -> int:
        return self.g_sense.shape[0] // self.n_antennas

    def g_block_row(self, j: int) -> np.ndarray:
        na = self.n_antennas
        return self.g_sense[j * na:(j + 1) * na]

    def c_block_row(self, j: int) -> np.ndarray:
        na = self.n_antennas
        return self.c_clutter[j * na:(j + 1) * na]

    def replace(self, **changes) -> "ChannelSet":
        from dataclasses import replace
        return replace(self, **changes)


def steering_vector(theta: float, n_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response ``exp(-j*pi*m*sin(theta))``, m = 0..N_A-1."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    m = np.arange(n_antennas)
    return np.exp(-1j * np.pi * m * np.sin(theta))


def angle_between(origin, target) -> float:
    """Angle of ``target`` seen from ``origin``, in (-pi, pi]."""
    dx = float(target[0]) - float(origin[0])
    dy = float(target[1]) - float(origin[1])
    if dx == 0.0 and dy == 0.0:
        raise GeometryError(f"coincident points {tuple(origin)} and {tuple(target)}")
    theta = math.atan2(dx, dy)
    if theta <= -math.pi:
        theta = math.pi
    return theta


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with variance ``var``."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def rician_weights(rician_factor: float) -> tuple[float, float]:
    if math.isinf(rician_factor):
        return 1.0, 0.0
    return (math.sqrt(rician_factor / (rician_factor + 1.0)),
            math.sqrt(1.0 / (rician_factor + 1.0)))


def _rician_channel(rng, position, tx_positions, n_antennas, rician_factor):
    w_los, w_nlos = rician_weights(rician_factor)
    los = np.concatenate([steering_vector(angle_between(tx, position), n_antennas)
                          for tx in tx_positions])
    nlos = complex_normal(rng, los.shape)
    return w_los * los + w_nlos * nlos


def draw_channels(config: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw every channel of one network realization from ``rng``.

    The draw order is fixed (user positions, Eve position, user channels,
    Eve channel, scattering gains, clutter), so equal generator state gives
    a bitwise-equal ChannelSet.
    """
    na = config.n_antennas
    user_pos = np.array([region.sample(rng) for region in config.user_regions])
    eve_pos = config.eve_region.sample(rng)

    h_users = np.array([
        _rician_channel(rng, p, config.tx_positions, na, config.rician_factor)
        for p in user_pos
    ])
    h_eve = _rician_channel(rng, eve_pos, config.tx_positions, na, config.rician_factor)

    aod = np.array([angle_between(tx, eve_pos) for tx in config.tx_positions])
    aoa = np.array([angle_between(rx, eve_pos) for rx in config.rx_positions])
    alpha = complex_normal(rng, (config.n_rx, config.n_tx), config.var_scatter)
    g = np.zeros((config.n_rx_antennas, config.n_tx_antennas), dtype=complex)
    for j in range(config.n_rx):
        a_rx = steering_vector(aoa[j], na)
        for i in range(config.n_tx):
            a_tx = steering_vector(aod[i], na)
            g[j * na:(j + 1) * na, i * na:(i + 1) * na] = alpha[j, i] * np.outer(a_rx, a_tx)

    c = complex_normal(rng, (config.n_rx_antennas, config.n_tx_antennas), config.var_clutter)

    return ChannelSet(
        h_users=h_users,
        h_eve=h_eve,
        g_sense=g,
        c_clutter=c,
        n_antennas=na,
        noise_user=np.full(config.n_users, float(config.var_noise_user)),
        noise_eve=float(config.var_noise_eve),
        noise_rx=np.full(config.n_rx, float(config.var_noise_rx)),
        aod=aod,
        aoa=aoa,
        user_positions=user_pos,
        eve_position=eve_pos,
    )
