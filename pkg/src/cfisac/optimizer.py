"""Joint beamforming / fronthaul-quantization design by minorization-maximization.

The sensing-SINR maximization is a linear-fractional program in the
covariance variables V_k = w_k w_k^H. A Charnes-Cooper change of variables
(divide everything by the SINR denominator Xi, keep z = 1/Xi) turns the
objective linear and adds one normalization equality. The remaining DC
constraints (secrecy and both fronthaul rates) are replaced at every
iteration by first-order bounds taken at the previous iterate, which gives
a convex problem with PSD and exponential-cone constraints; it is solved
with cvxpy. By default Clarabel (interior point, fast) takes the large
early steps and SCS (first order, tighter optimality) polishes once the
steps shrink. Because every surrogate is a global bound,
the next surrogate may be built around an extrapolated anchor; the outer
loop does so and falls back to the plain step when that does not pay.
Beamformers are recovered from the relaxed V_k by their dominant eigenpair.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import cvxpy as cp
import numpy as np

from .model import (Budgets, DesignPoint, check_feasibility, eve_sinr, log2det, sensing_sinr,
                    user_sinr)
from .scenario import ChannelSet, complex_normal

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
LOG_FLOOR = 1e-12
SOLVERS = ("auto", "SCS", "CLARABEL")


class InfeasibleError(RuntimeError):
    """No strictly feasible starting point was found; ``constraint`` names the culprit."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class SolverError(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(f"subproblem solver failed with status {status!r} {message}".strip())
        self.status = status


class MonotonicityError(RuntimeError):
    pass


class RankRecoveryError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransformedPoint:
    gamma: np.ndarray      # (K, n, n) Hermitian PSD
    omega_tx: np.ndarray   # (N_T,)
    omega_rx: np.ndarray   # (N_R,)
    z: float

    def vector(self) -> np.ndarray:
        """Real vector used for the convergence distance."""
        g = np.asarray(self.gamma)
        return np.concatenate([g.real.ravel(), g.imag.ravel(),
                               np.ravel(self.omega_tx), np.ravel(self.omega_rx), [self.z]])

    def scaled(self, c: float) -> "TransformedPoint":
        return TransformedPoint(self.gamma * c, self.omega_tx * c, self.omega_rx * c, self.z * c)

    @cached_property
    def covariance(self) -> np.ndarray:
        """Sum_k Gamma_k + blockdiag(omega_i I), cached (the point is immutable)."""
        na = self.gamma.shape[1] // len(self.omega_tx)
        return stacked_covariance(self.gamma, self.omega_tx, na)


@dataclass(frozen=True)
class MMSettings:
    epsilon: float = 1e-4
    max_iters: int = 100
    solver_tol: float = 1e-7
    rank_tol: float = 1e-3
    monotone_rtol: float = 1e-6
    feasibility_tol: float = 1e-6
    n_randomizations: int = 100
    init_margin: float = 0.02
    # "auto": Clarabel until the MM step drops below polish_step, then SCS
    solver: str = "auto"
    polish_step: float = 1e-2
    solver_max_iters: int = 100_000
    # safeguarded extrapolation along the last MM step; 0 gives plain MM
    max_extrapolation: float = 8.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("epsilon", "solver_tol", "rank_tol", "monotone_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {', '.join(SOLVERS)}")


@dataclass
class MMTrace:
    objectives: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    converged: bool = False
    rank_ratios: list[float] = field(default_factory=list)
    zeta: float = 1.0
    randomized: bool = False
    extrapolations: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.steps)


# ----------------------------------------------------------------------------
# transformed variables
# ----------------------------------------------------------------------------

def _expand(q, n_antennas):
    return np.repeat(np.asarray(q, dtype=float), n_antennas)


def stacked_covariance(gamma, omega_tx, n_antennas) -> np.ndarray:
    """Sum_k Gamma_k + blockdiag(omega_i I): the transmit covariance in any scaling."""
    return np.sum(gamma, axis=0) + np.diag(_expand(omega_tx, n_antennas))


def xi_denominator(v, q_tx, q_rx, ch: ChannelSet, noise=None) -> float:
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    na = ch.n_antennas
    s = stacked_covariance(v, q_tx, na)
    c = ch.c_clutter
    return (float(np.real(np.trace(c @ s @ c.conj().T)))
            + na * float(np.sum(noise)) + na * float(np.sum(q_rx)))


def to_transformed(v, q_tx, q_rx, ch: ChannelSet, noise=None) -> TransformedPoint:
    xi = xi_denominator(v, q_tx, q_rx, ch, noise)
    if not xi > 0:
        raise ValueError(f"non-positive SINR denominator {xi}")
    return TransformedPoint(np.asarray(v, dtype=complex) / xi,
                            np.asarray(q_tx, dtype=float) / xi,
                            np.asarray(q_rx, dtype=float) / xi,
                            1.0 / xi)


def from_transformed(theta: TransformedPoint):
    if not theta.z > 0:
        raise ValueError(f"degenerate solution: z = {theta.z}")
    return theta.gamma / theta.z, theta.omega_tx / theta.z, theta.omega_rx / theta.z


def normalization_value(theta: TransformedPoint, ch: ChannelSet, noise=None) -> float:
    """Left side of the Charnes-Cooper normalization (equals 1 when feasible)."""
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    na = ch.n_antennas
    s = theta.covariance
    c = ch.c_clutter
    return (float(np.real(np.trace(c @ s @ c.conj().T)))
            + theta.z * na * float(np.sum(noise)) + na * float(np.sum(theta.omega_rx)))


def transformed_objective(theta: TransformedPoint, ch: ChannelSet) -> float:
    s = theta.covariance
    g = ch.g_sense
    return float(np.real(np.trace(g @ s @ g.conj().T)))


# ----------------------------------------------------------------------------
# exact transformed constraint functions and their first-order bounds
# ----------------------------------------------------------------------------

def _log2(x: float) -> float:
    if not x >= LOG_FLOOR:
        raise ValueError(f"log argument {x:.3e} below floor; anchor is not strictly feasible")
    return math.log2(x)


def _secrecy_terms(theta: TransformedPoint, ch: ChannelSet, k: int):
    """(a, b, e, d): user-k total / interference and Eve total / interference."""
    s = theta.covariance
    s_minus = s - theta.gamma[k]
    hk, he = ch.h_users[k], ch.h_eve
    zk = theta.z * ch.noise_user[k]
    ze = theta.z * ch.noise_eve
    a = float(np.real(hk.conj() @ s @ hk)) + zk
    b = float(np.real(hk.conj() @ s_minus @ hk)) + zk
    e = float(np.real(he.conj() @ s @ he)) + ze
    d = float(np.real(he.conj() @ s_minus @ he)) + ze
    return a, b, e, d


def transformed_secrecy(theta: TransformedPoint, ch: ChannelSet, k: int) -> float:
    """User-k secrecy rate in transformed variables (no flooring at 0)."""
    a, b, e, d = _secrecy_terms(theta, ch, k)
    return _log2(a) - _log2(b) - _log2(e) + _log2(d)


def logdet_tangent(x1: np.ndarray, x2: np.ndarray) -> float:
    """First-order expansion of log2 det at ``x1``, evaluated at ``x2``."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    if x1.shape != x2.shape:
        raise ValueError("shape mismatch")
    x1_inv = np.linalg.inv(x1)
    return log2det(x1) + float(np.real(np.trace(x1_inv @ (x2 - x1)))) / LN2


def _tx_block(theta: TransformedPoint, i: int, na: int) -> np.ndarray:
    return theta.covariance[i * na:(i + 1) * na, i * na:(i + 1) * na]


def _n_antennas(theta: TransformedPoint) -> int:
    return theta.gamma.shape[1] // len(theta.omega_tx)


def transformed_rate_tx(theta: TransformedPoint, i: int) -> float:
    na = _n_antennas(theta)
    return log2det(_tx_block(theta, i, na)) - na * _log2(theta.omega_tx[i])


def _rx_matrix(theta: TransformedPoint, ch: ChannelSet, j: int, noise) -> np.ndarray:
    na = ch.n_antennas
    m = ch.g_block_row(j) + ch.c_block_row(j)
    s = theta.covariance
    return m @ s @ m.conj().T + (theta.z * noise[j] + theta.omega_rx[j]) * np.eye(na)


def transformed_rate_rx(theta: TransformedPoint, ch: ChannelSet, j: int, noise=None) -> float:
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    return log2det(_rx_matrix(theta, ch, j, noise)) - ch.n_antennas * _log2(theta.omega_rx[j])


def _trace_product(a, b) -> float:
    return float(np.real(np.einsum("ij,ji->", a, b)))


class AnchorBounds:
    """First-order bounds of the three DC constraints, linearized once at ``anchor``.

    ``secrecy`` is a concave lower bound of the user-k secrecy rate; the two
    fronthaul methods are convex upper bounds of the rates. All three are
    tight at the anchor. The subproblem and the tests share these constants.
    """

    def __init__(self, anchor: TransformedPoint, ch: ChannelSet, noise=None):
        self.ch = ch
        self.noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
        na = ch.n_antennas
        terms = [_secrecy_terms(anchor, ch, k) for k in range(ch.n_users)]
        self.b0 = np.array([t[1] for t in terms])
        self.e0 = np.array([t[2] for t in terms])
        self.secrecy_const = np.array([_log2(b) + _log2(e) - 2.0 / LN2
                                       for b, e in zip(self.b0, self.e0)])
        self.tx_inv, self.tx_const = [], []
        for i in range(ch.n_tx):
            x0 = _tx_block(anchor, i, na)
            self.tx_inv.append(_hermitize(np.linalg.inv(x0)))
            self.tx_const.append(log2det(x0) - na / LN2)
        self.rx_inv, self.rx_const = [], []
        for j in range(ch.n_rx):
            a0 = _rx_matrix(anchor, ch, j, self.noise)
            self.rx_inv.append(_hermitize(np.linalg.inv(a0)))
            self.rx_const.append(log2det(a0) - na / LN2)

    def secrecy(self, theta: TransformedPoint, k: int) -> float:
        a, b, e, d = _secrecy_terms(theta, self.ch, k)
        linear = (b / self.b0[k] + e / self.e0[k]) / LN2
        return _log2(a) + _log2(d) - self.secrecy_const[k] - linear

    def rate_tx(self, theta: TransformedPoint, i: int) -> float:
        na = self.ch.n_antennas
        return (self.tx_const[i] + _trace_product(self.tx_inv[i], _tx_block(theta, i, na)) / LN2
                - na * _log2(theta.omega_tx[i]))

    def rate_rx(self, theta: TransformedPoint, j: int) -> float:
        a = _rx_matrix(theta, self.ch, j, self.noise)
        return (self.rx_const[j] + _trace_product(self.rx_inv[j], a) / LN2
                - self.ch.n_antennas * _log2(theta.omega_rx[j]))


def secrecy_surrogate(theta: TransformedPoint, anchor: TransformedPoint,
                      ch: ChannelSet, k: int) -> float:
    """Concave lower bound of ``transformed_secrecy``, tight at ``anchor``."""
    return AnchorBounds(anchor, ch).secrecy(theta, k)


def fronthaul_tx_surrogate(theta: TransformedPoint, anchor: TransformedPoint, i: int) -> float:
    na = _n_antennas(theta)
    return (logdet_tangent(_tx_block(anchor, i, na), _tx_block(theta, i, na))
            - na * _log2(theta.omega_tx[i]))


def fronthaul_rx_surrogate(theta: TransformedPoint, anchor: TransformedPoint,
                           ch: ChannelSet, j: int, noise=None) -> float:
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    return (logdet_tangent(_rx_matrix(anchor, ch, j, noise), _rx_matrix(theta, ch, j, noise))
            - ch.n_antennas * _log2(theta.omega_rx[j]))


def max_violation(theta: TransformedPoint, ch: ChannelSet, budgets: Budgets, noise=None) -> float:
    """Largest violation of the transformed problem's inequality constraints (<= 0 means feasible)."""
    noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
    viol = [budgets.secrecy_floor - transformed_secrecy(theta, ch, k) for k in range(ch.n_users)]
    viol += [transformed_rate_tx(theta, i) - budgets.cap_tx for i in range(ch.n_tx)]
    viol += [transformed_rate_rx(theta, ch, j, noise) - budgets.cap_rx for j in range(ch.n_rx)]
    na = ch.n_antennas
    for i in range(ch.n_tx):
        p = float(np.real(np.trace(_tx_block(theta, i, na))))
        viol.append((p - theta.z * budgets.power) / max(theta.z * budgets.power, 1e-300))
    return max(viol)


# ----------------------------------------------------------------------------
# convex subproblem
# ----------------------------------------------------------------------------

class SubproblemSolver:
    """Convex surrogate problem compiled once per channel set.

    Anchor-dependent quantities enter as cvxpy Parameters, so repeated MM
    iterations only refresh parameter values.
    """

    def __init__(self, ch: ChannelSet, budgets: Budgets, noise=None):
        self.ch = ch
        self.budgets = budgets
        self.noise = ch.noise_rx if noise is None else np.asarray(noise, dtype=float)
        na, nt, nr, kk = ch.n_antennas, ch.n_tx, ch.n_rx, ch.n_users
        n = na * nt
        self.n = n

        self.gamma = [cp.Variable((n, n), hermitian=True, name=f"gamma{k}") for k in range(kk)]
        self.w_tx = cp.Variable(nt, name="omega_tx")
        self.w_rx = cp.Variable(nr, name="omega_rx")
        self.z = cp.Variable(name="z")

        expand = np.kron(np.eye(nt), np.ones((na, 1)))
        gsum = self.gamma[0]
        for g in self.gamma[1:]:
            gsum = gsum + g
        s = gsum + cp.diag(expand @ self.w_tx)

        def lin(mat, x):
            return cp.real(cp.trace(mat @ x))

        g, c = ch.g_sense, ch.c_clutter
        objective = lin(g.conj().T @ g, s)

        cons = [gk >> 0 for gk in self.gamma]
        cons.append(self.z >= 0)

        # secrecy lower bounds
        self.inv_b0 = cp.Parameter(kk, nonneg=True)
        self.inv_e0 = cp.Parameter(kk, nonneg=True)
        self.sec_const = cp.Parameter(kk)
        hh_e = np.outer(ch.h_eve, ch.h_eve.conj())
        for k in range(kk):
            hh = np.outer(ch.h_users[k], ch.h_users[k].conj())
            s_minus = s - self.gamma[k]
            a = lin(hh, s) + self.z * ch.noise_user[k]
            b = lin(hh, s_minus) + self.z * ch.noise_user[k]
            e = lin(hh_e, s) + self.z * ch.noise_eve
            d = lin(hh_e, s_minus) + self.z * ch.noise_eve
            lower = ((cp.log(a) + cp.log(d)) / LN2 - self.sec_const[k]
                     - (self.inv_b0[k] * b + self.inv_e0[k] * e) / LN2)
            cons.append(lower >= budgets.secrecy_floor)

        # transmit fronthaul upper bounds: tangent of logdet at the anchor block
        self.tx_inv = [cp.Parameter((n, n), hermitian=True) for _ in range(nt)]
        self.tx_const = cp.Parameter(nt)
        for i in range(nt):
            upper = (self.tx_const[i] + lin(self.tx_inv[i], s) / LN2
                     - na * cp.log(self.w_tx[i]) / LN2)
            cons.append(upper <= budgets.cap_tx)

        # receive fronthaul upper bounds
        self.rx_inv = [cp.Parameter((n, n), hermitian=True) for _ in range(nr)]
        self.rx_trace = cp.Parameter(nr, nonneg=True)
        self.rx_const = cp.Parameter(nr)
        for j in range(nr):
            upper = (self.rx_const[j]
                     + (lin(self.rx_inv[j], s)
                        + self.rx_trace[j] * (self.z * self.noise[j] + self.w_rx[j])) / LN2
                     - na * cp.log(self.w_rx[j]) / LN2)
            cons.append(upper <= budgets.cap_rx)

        for i in range(nt):
            sel = np.zeros((n, n))
            sel[i * na:(i + 1) * na, i * na:(i + 1) * na] = np.eye(na)
            cons.append(lin(sel, s) - self.z * budgets.power <= 0)

        cons.append(lin(c.conj().T @ c, s) + self.z * na * float(np.sum(self.noise))
                    + na * cp.sum(self.w_rx) == 1)

        self.obj_scale = cp.Parameter(nonneg=True)
        self.problem = cp.Problem(cp.Maximize(self.obj_scale * objective), cons)

    def _set_anchor(self, anchor: TransformedPoint):
        ch, na, n = self.ch, self.ch.n_antennas, self.n
        bounds = AnchorBounds(anchor, ch, self.noise)
        self.inv_b0.value = 1.0 / bounds.b0
        self.inv_e0.value = 1.0 / bounds.e0
        self.sec_const.value = bounds.secrecy_const
        for i in range(ch.n_tx):
            emb = np.zeros((n, n), dtype=complex)
            emb[i * na:(i + 1) * na, i * na:(i + 1) * na] = bounds.tx_inv[i]
            self.tx_inv[i].value = emb
        self.tx_const.value = np.array(bounds.tx_const)
        for j in range(ch.n_rx):
            m = ch.g_block_row(j) + ch.c_block_row(j)
            self.rx_inv[j].value = _hermitize(m.conj().T @ bounds.rx_inv[j] @ m)
        self.rx_trace.value = np.array([float(np.real(np.trace(x))) for x in bounds.rx_inv])
        self.rx_const.value = np.array(bounds.rx_const)

    def solve(self, anchor: TransformedPoint, settings: MMSettings = MMSettings(), solver=None):
        """Solve the surrogate problem at ``anchor``; returns (point, status).

        ``solver`` ("SCS" or "CLARABEL") overrides the settings; "auto" in
        the settings means SCS here, the phase switch lives in mm_optimize.
        """
        solver = solver or ("SCS" if settings.solver == "auto" else settings.solver)
        self._set_anchor(anchor)
        # O(1) objective so the solver's absolute gap tolerance is meaningful
        self.obj_scale.value = 1.0 / max(transformed_objective(anchor, self.ch), 1e-12)
        tol = settings.solver_tol
        try:
            with warnings.catch_warnings():
                # cvxpy's complex-to-real pass emits this for 1x1 Hermitian variables
                warnings.filterwarnings("ignore", message="Initializing a Constant with a nested list")
                # inaccurate solves are accepted and recorded in the trace status instead
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                if solver == "SCS":
                    self.problem.solve(solver=cp.SCS, eps_abs=tol * 1e-3, eps_rel=tol * 1e-3,
                                       max_iters=settings.solver_max_iters, warm_start=True)
                else:
                    self.problem.solve(solver=cp.CLARABEL, tol_gap_abs=tol * 1e-1,
                                       tol_gap_rel=tol * 1e-1, tol_feas=tol * 1e-1)
        except cp.SolverError as exc:
            raise SolverError("solver_error", str(exc)) from exc
        status = self.problem.status
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise SolverError(status)
        gamma = np.array([_project_psd(g.value) for g in self.gamma])
        w_tx = np.maximum(np.asarray(self.w_tx.value, dtype=float), LOG_FLOOR)
        w_rx = np.maximum(np.asarray(self.w_rx.value, dtype=float), LOG_FLOOR)
        z = float(self.z.value)
        if not z > 0:
            raise SolverError(status, "(z <= 0)")
        point = TransformedPoint(gamma, w_tx, w_rx, z)
        # the transformed problem is scale invariant except for the normalization,
        # so rescaling removes solver round-off without touching feasibility
        point = point.scaled(1.0 / normalization_value(point, self.ch, self.noise))
        return point, status


def _hermitize(x):
    return 0.5 * (x + x.conj().T)


def _project_psd(x):
    x = _hermitize(np.asarray(x, dtype=complex))
    lam, u = np.linalg.eigh(x)
    lam = np.clip(lam, 0.0, None)
    return (u * lam) @ u.conj().T


def solve_subproblem(anchor: TransformedPoint, ch: ChannelSet, budgets: Budgets,
                     noise=None, settings: MMSettings = MMSettings()) -> TransformedPoint:
    point, _ = SubproblemSolver(ch, budgets, noise).solve(anchor, settings)
    return point


# ----------------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------------

def smallest_feasible_variance(rate, cap: float, lo: float = 1e-12, hi: float = 1e12,
                               iters: int = 60) -> float:
    """Smallest variance (log-space bisection) with ``rate(var) <= cap``.

    ``rate`` must be non-increasing in the variance. Returns the feasible
    end of the final bracket.
    """
    if rate(lo) <= cap:
        return lo
    if rate(hi) > cap:
        raise ValueError("rate exceeds the cap over the whole bracket")
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if rate(math.exp(mid)) <= cap:
            b = mid
        else:
            a = mid
    return math.exp(b)


def _tx_rate(block: np.ndarray, var: float) -> float:
    na = block.shape[0]
    return log2det(block @ block.conj().T + var * np.eye(na)) - na * math.log2(var)


def rx_quantization_for_cap(design: DesignPoint, ch: ChannelSet, cap: float,
                            noise=None, **bisect) -> np.ndarray:
    """Per-Rx smallest quantization variance meeting ``cap`` (receive fronthaul rate)."""
    from .model import rx_covariance
    out = []
    na = ch.n_antennas
    for j in range(ch.n_rx):
        cov = rx_covariance(design, ch, j, noise)

        def rate(q, cov=cov):
            return log2det(cov + q * np.eye(na)) - na * math.log2(q)
        out.append(smallest_feasible_variance(rate, cap, **bisect))
    return np.array(out)


def _unit_columns(d):
    norms = np.linalg.norm(d, axis=0)
    if np.any(norms < 1e-9 * max(1.0, norms.max(initial=0.0))):
        return None
    return d / norms


def _candidate_directions(ch: ChannelSet):
    hk = ch.h_users.T  # (n, K)
    n, kk = hk.shape
    he = ch.h_eve
    cands = []
    if np.linalg.norm(he) > 0:
        proj = np.eye(n) - np.outer(he, he.conj()) / np.vdot(he, he).real
        cands.append(("mr_null", _unit_columns(proj @ hk)))
    else:
        cands.append(("mr", _unit_columns(hk)))
    if n > kk:
        cols = []
        for k in range(kk):
            others = [hk[:, kp] for kp in range(kk) if kp != k]
            if np.linalg.norm(he) > 0:
                others.append(he)
            if others:
                q, _ = np.linalg.qr(np.column_stack(others))
                cols.append(hk[:, k] - q @ (q.conj().T @ hk[:, k]))
            else:
                cols.append(hk[:, k])
        cands.append(("zf_null", _unit_columns(np.column_stack(cols))))
    if np.linalg.norm(he) > 0:
        cands.append(("mr", _unit_columns(hk)))
    return [(name, d) for name, d in cands if d is not None]


def _raw_secrecy(design, ch):
    return min(np.log2(1 + user_sinr(design, ch, k)) - np.log2(1 + eve_sinr(design, ch, k))
               for k in range(design.n_users))


def initialize_feasible(ch: ChannelSet, budgets: Budgets, noise=None, rng=None,
                        margin: float = 0.02, n_grid: int = 40) -> TransformedPoint:
    """Strictly feasible starting point for the transformed problem.

    Candidate beam directions (maximum ratio projected off the Eve channel,
    zero forcing against Eve and co-users, plain maximum ratio) get an equal
    power split; per-RRH quantization ratios come from bisection on the
    transmit fronthaul rate, and the power scale is searched on a grid below
    the largest scale meeting power and fronthaul budgets (with ``margin``).
    """
    na, nt, kk = ch.n_antennas, ch.n_tx, ch.n_users
    cap_tx = budgets.cap_tx * (1 - margin)
    power = budgets.power * (1 - margin)
    best = None
    for name, d in _candidate_directions(ch):
        b = d / math.sqrt(kk)
        ratios, per_rrh = [], []
        for i in range(nt):
            bi = b[i * na:(i + 1) * na]
            ratios.append(smallest_feasible_variance(lambda v, bi=bi: _tx_rate(bi, v), cap_tx))
            per_rrh.append(float(np.real(np.vdot(bi, bi))))
        ratios = np.array(ratios)
        t_max = min(power / (p + na * r) for p, r in zip(per_rrh, ratios))
        for t in t_max * np.logspace(-4, 0, n_grid):
            design = DesignPoint(math.sqrt(t) * b, t * ratios, np.ones(ch.n_rx))
            sec = _raw_secrecy(design, ch)
            if best is None or sec > best[0] + 1e-12 or (abs(sec - best[0]) <= 1e-12 and t > best[2]):
                best = (sec, name, t, design)
    if best is None:
        raise InfeasibleError("secrecy_floor", "no usable beam direction")
    sec, name, t, design = best
    if not sec > budgets.secrecy_floor:
        raise InfeasibleError(
            "secrecy_floor", f"best secrecy rate found {sec:.4f} does not exceed the floor "
                     f"{budgets.secrecy_floor:.4f} bits/symbol")
    q_rx = rx_quantization_for_cap(design, ch, budgets.cap_rx * (1 - margin), noise)
    log.debug("initial point from %s directions, scale %.4g, secrecy %.4f", name, t, sec)
    v = np.array([np.outer(w, w.conj()) for w in design.beam.T])
    return to_transformed(v, design.q_tx, q_rx, ch, noise)


# ----------------------------------------------------------------------------
# beamformer recovery
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RankOneReport:
    eig_ratio: float
    zeta: float = 1.0


def extract_rank_one(v: np.ndarray):
    """Dominant-eigenpair beamformer sqrt(lambda_1) u_1 of a PSD matrix."""
    v = _hermitize(np.asarray(v, dtype=complex))
    lam, u = np.linalg.eigh(v)
    if lam[-1] <= 0:
        return np.zeros(v.shape[0], dtype=complex), RankOneReport(0.0, 1.0)
    ratio = float(max(lam[-2], 0.0) / lam[-1]) if len(lam) > 1 else 0.0
    return math.sqrt(lam[-1]) * u[:, -1], RankOneReport(ratio, 1.0)


def _upper_ok(design, ch, budgets, tol, noise):
    report = check_feasibility(design, ch, budgets, tol)
    return all(c.ok for c in report.checks if c.name != "secrecy"), report


def _shrink_to_budgets(beam, q_tx, q_rx, ch, budgets, tol, noise, iters=60):
    """Largest common zeta in (0, 1] restoring power and fronthaul constraints."""
    design = DesignPoint(beam, q_tx, q_rx)
    ok, _ = _upper_ok(design, ch, budgets, tol, noise)
    if ok:
        return design, 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _upper_ok(DesignPoint(mid * beam, q_tx, q_rx), ch, budgets, tol, noise)[0]:
            lo = mid
        else:
            hi = mid
    return DesignPoint(lo * beam, q_tx, q_rx), lo


def recover_design(theta: TransformedPoint, ch: ChannelSet, budgets: Budgets,
                   settings: MMSettings = MMSettings(), rng=None, noise=None, trace=None):
    """Turn a relaxed transformed point into beamformers meeting every constraint.

    Rank-one truncation first; a common shrink factor zeta restores power and
    fronthaul budgets; Gaussian randomization is the fallback when the
    secrecy floor is lost. Raises RankRecoveryError if nothing works.
    """
    v, q_tx, q_rx = from_transformed(theta)
    tol = settings.feasibility_tol
    cols, ratios = [], []
    for vk in v:
        w, rep = extract_rank_one(vk)
        cols.append(w)
        ratios.append(rep.eig_ratio)
    if trace is not None:
        trace.rank_ratios = ratios
    design, zeta = _shrink_to_budgets(np.column_stack(cols), q_tx, q_rx, ch, budgets, tol, noise)
    if check_feasibility(design, ch, budgets, tol).ok:
        if trace is not None:
            trace.zeta = zeta
        return design

    rng = np.random.default_rng(0) if rng is None else rng
    roots = []
    for vk in v:
        lam, u = np.linalg.eigh(_hermitize(vk))
        roots.append(u * np.sqrt(np.clip(lam, 0, None)))
    best = None
    for _ in range(settings.n_randomizations):
        beam = np.column_stack([r @ complex_normal(rng, r.shape[1]) for r in roots])
        cand, zeta = _shrink_to_budgets(beam, q_tx, q_rx, ch, budgets, tol, noise)
        if not check_feasibility(cand, ch, budgets, tol).ok:
            continue
        val = sensing_sinr(cand, ch, noise)
        if best is None or val > best[0]:
            best = (val, cand, zeta)
    if best is None:
        raise RankRecoveryError(
            f"secrecy floor lost after rank-one recovery (eigenvalue ratios {ratios})")
    if trace is not None:
        trace.zeta = best[2]
        trace.randomized = True
    return best[1]


# ----------------------------------------------------------------------------
# main loop
# ----------------------------------------------------------------------------

def _extrapolated_anchor(cur, prev, beta, ch, noise):
    """cur + beta * (cur - prev), projected back to PSD and renormalized.

    The point may be slightly infeasible; that is harmless because every
    surrogate is a global bound, so the subproblem solved around it still
    returns a feasible point. Returns None when the jump leaves the domain.
    """
    cand = TransformedPoint(
        np.array([_project_psd(g) for g in cur.gamma + beta * (cur.gamma - prev.gamma)]),
        cur.omega_tx + beta * (cur.omega_tx - prev.omega_tx),
        cur.omega_rx + beta * (cur.omega_rx - prev.omega_rx),
        cur.z + beta * (cur.z - prev.z))
    if not (cand.z > 0 and min(cand.omega_tx.min(), cand.omega_rx.min()) > LOG_FLOOR):
        return None
    norm = normalization_value(cand, ch, noise)
    return cand.scaled(1.0 / norm) if norm > 0 else None


def _solve_with_fallback(solver: SubproblemSolver, anchor, settings, name):
    """Solve with ``name``; on a solver failure retry once with the other backend."""
    try:
        point, status = solver.solve(anchor, settings, name)
    except SolverError as exc:
        other = "CLARABEL" if name == "SCS" else "SCS"
        log.debug("%s failed (%s); retrying with %s", name, exc, other)
        name = other
        point, status = solver.solve(anchor, settings, name)
    return point, f"{status}/{name}"


def mm_optimize(ch: ChannelSet, budgets: Budgets, noise=None,
                settings: MMSettings = MMSettings(), rng=None):
    """Run the MM iterations from a feasible start; returns (DesignPoint, MMTrace)."""
    trace = MMTrace()
    theta = initialize_feasible(ch, budgets, noise, margin=settings.init_margin)
    obj = transformed_objective(theta, ch)
    trace.objectives.append(obj)
    trace.residuals.append(max(max_violation(theta, ch, budgets, noise), 0.0))
    trace.statuses.append("init")
    trace.wall_times.append(0.0)

    if not np.any(ch.g_sense):
        # objective is identically zero: any feasible point is optimal
        trace.converged = True
        trace.steps.append(0.0)
        return recover_design(theta, ch, budgets, settings, rng, noise, trace), trace

    solver = SubproblemSolver(ch, budgets, noise)
    auto = settings.solver == "auto"
    polishing = not auto
    prev, prev_step = None, None
    for _ in range(settings.max_iters):
        t0 = time.perf_counter()
        name = ("SCS" if polishing else "CLARABEL") if auto else settings.solver
        beta, new = 0.0, None
        if prev is not None and prev_step and settings.max_extrapolation > 0:
            # geometric-series guess of the remaining distance along the last step
            ratio = trace.steps[-1] / prev_step
            if 0 < ratio < 1:
                beta = min(ratio / (1.0 - ratio), settings.max_extrapolation)
                anchor = _extrapolated_anchor(theta, prev, beta, ch, noise)
                if anchor is not None:
                    try:
                        # no backend fallback here: a failed guess just means the plain step
                        new, status = solver.solve(anchor, settings, name)
                        status = f"{status}/{name}"
                        if transformed_objective(new, ch) < obj:
                            new = None
                    except (SolverError, ValueError, np.linalg.LinAlgError):
                        new = None
        if new is None:
            beta = 0.0
            new, status = _solve_with_fallback(solver, theta, settings, name)
        new_obj = transformed_objective(new, ch)
        slack = settings.monotone_rtol * max(abs(obj), 1e-12) + settings.solver_tol * 1e-2
        if new_obj < obj - slack and auto and not polishing:
            # interior-point round-off near the optimum: redo the step with SCS
            polishing, beta = True, 0.0
            new, status = _solve_with_fallback(solver, theta, settings, "SCS")
            new_obj = transformed_objective(new, ch)
        if new_obj < obj - slack:
            raise MonotonicityError(
                f"objective decreased from {obj:.12g} to {new_obj:.12g} at iteration {trace.iterations + 1}")
        step = float(np.linalg.norm(new.vector() - theta.vector()))
        if trace.steps:
            prev_step = trace.steps[-1]
        prev, theta, obj = theta, new, new_obj
        trace.objectives.append(obj)
        trace.steps.append(step)
        trace.extrapolations.append(beta)
        trace.residuals.append(max(max_violation(theta, ch, budgets, noise), 0.0))
        trace.statuses.append(status)
        trace.wall_times.append(time.perf_counter() - t0)
        if step <= settings.epsilon and polishing:
            trace.converged = True
            break
        if step <= settings.polish_step:
            polishing = True
    design = recover_design(theta, ch, budgets, settings, rng, noise, trace)
    return design, trace
