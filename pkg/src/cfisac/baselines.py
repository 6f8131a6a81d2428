"""Reference transmit designs: channel-blind random beamforming and the
distributed-sensing variant of the optimized design."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .detection import DISTRIBUTED
from .model import Budgets, DesignPoint
from .optimizer import (MMSettings, _tx_rate, mm_optimize, rx_quantization_for_cap,
                        smallest_feasible_variance)
from .scenario import ChannelSet, complex_normal

QUANT_FLOOR = 1e-6
QUANT_CEIL = 1e6
BISECT_ITERS = 60


def _scaled_block(block: np.ndarray, power: float, q: float) -> np.ndarray:
    """Rescale ``block`` so that ||block||_F^2 + N_A q equals ``power``."""
    na = block.shape[0]
    energy = float(np.real(np.vdot(block, block)))
    return block * math.sqrt(max(power - na * q, 0.0) / energy)


def random_beamforming_design(ch: ChannelSet, budgets: Budgets, rng=None) -> DesignPoint:
    """I.i.d. Gaussian beamformers at full power, quantized to fit the fronthaul.

    Per Tx-RRH the smallest transmit quantization variance meeting the cap is
    found by bisection, with the beam block rescaled at every trial value so
    the power budget stays met with equality. Secrecy is not enforced.
    """
    rng = np.random.default_rng() if rng is None else rng
    na = ch.n_antennas
    raw = complex_normal(rng, (ch.n_tx * na, ch.n_users))
    blocks, q_tx = [], []
    for i in range(ch.n_tx):
        b = raw[i * na:(i + 1) * na]
        q_hi = budgets.power / na * (1 - 1e-9)

        def rate(q, b=b):
            return _tx_rate(_scaled_block(b, budgets.power, q), q)
        q = smallest_feasible_variance(rate, budgets.cap_tx, QUANT_FLOOR, q_hi, BISECT_ITERS)
        blocks.append(_scaled_block(b, budgets.power, q))
        q_tx.append(q)
    beam = np.vstack(blocks)
    partial = DesignPoint(beam, np.array(q_tx), np.ones(ch.n_rx))
    q_rx = rx_quantization_for_cap(partial, ch, budgets.cap_rx, lo=QUANT_FLOOR,
                                   hi=QUANT_CEIL, iters=BISECT_ITERS)
    return DesignPoint(beam, np.array(q_tx), q_rx)


def distributed_sensing_design(ch: ChannelSet, budgets: Budgets, noise=None,
                               settings: MMSettings = MMSettings(), rng=None) -> DesignPoint:
    """The optimized transmit design, tagged for local detection plus majority vote."""
    design, _ = mm_optimize(ch, budgets, noise, settings, rng)
    return replace(design, fusion=DISTRIBUTED)
