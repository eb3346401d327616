"""Derivative-free Polak-Ribiere-Polyak iteration for ``F(X) = 0`` on a manifold.

The merit ``f(X) = ||F(X)||^2 / 2`` is only ever evaluated, never
differentiated: the field value plays the role of the gradient in the PRP
recursion, and a two-sided non-monotone backtracking search against an
averaged reference value ``Gamma_k`` (plus a summable slack ``delta_k``)
keeps the iteration globally convergent.
"""

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DivideByZero, ManifoldZerosError
from .manifold import POINT_TOL

# Relative round-off slack for the Gamma/Phi bookkeeping assertions.
PINEQ_SLACK = 1e-12


class LineSearchFailed(ManifoldZerosError):
    pass


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAILED = "line_search_failed"
    NEWTON_STALLED = "newton_stalled"


@dataclass(frozen=True)
class PrpConfig:
    rho: float = 0.5
    t1: float = 1e-10
    t2: float = 1e-10
    lam: float = 0.6
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    eps_fd: float = 1e-8
    e_a: float = 1e-6
    e_r: float = 1e-5
    max_iter: int = 20000
    max_backtracks: int = 60
    strict: bool = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("t1 and t2 must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if not 0.0 < self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha_max")
        if self.eps_fd <= 0:
            raise ValueError("eps_fd must be positive")
        if self.max_iter < 0 or self.max_backtracks < 1:
            raise ValueError("iteration caps must be non-negative")


class HistoryRow(NamedTuple):
    """Residual at ``X_k`` and the step that produced it (zeros for k = 0)."""

    k: int
    residual: float
    alpha: float
    sign: int
    backtracks: int


@dataclass
class SolveReport:
    status: Status
    iters: int
    nf: int
    res0: float
    res_final: float
    history: list
    wall_time: float
    x: Optional[np.ndarray] = None
    step_norms: list = field(default_factory=list)
    pineq_violations: int = 0
    reprojections: int = 0
    max_point_error: float = 0.0

    @property
    def converged(self):
        return self.status is Status.CONVERGED


@dataclass
class PrpState:
    k: int
    X: np.ndarray
    F: np.ndarray
    res: float
    Gamma: float
    Phi: float
    F0_norm: float
    nf: int = 1
    X_prev: Optional[np.ndarray] = None
    F_prev: Optional[np.ndarray] = None
    res_prev: float = 0.0
    prev_dir: Optional[np.ndarray] = None
    prev_step: Optional[np.ndarray] = None

    @property
    def f(self):
        return 0.5 * self.res**2


class LineSearchResult(NamedTuple):
    step: np.ndarray
    X: np.ndarray
    F: np.ndarray
    res: float
    alpha: float
    sign: int
    backtracks: int
    nevals: int


def delta_schedule(k, F0_norm):
    """Summable slack ``||F(X_0)|| / ((2 + k) ln^2(2 + k))``."""
    return F0_norm / ((2 + k) * math.log(2 + k) ** 2)


def compute_beta(F_k, F_prev_transported, F_prev_norm, inner=None):
    """PRP coefficient ``<F_k, F_k - T F_{k-1}> / ||F_{k-1}||^2``."""
    if F_prev_norm <= 1e-300:
        raise DivideByZero("previous residual vanished")
    Y = F_k - F_prev_transported
    ip = float(np.vdot(F_k, Y)) if inner is None else inner(F_k, Y)
    return ip / F_prev_norm**2


def compute_direction(F_k, beta=0.0, transported_prev_dir=None):
    if transported_prev_dir is None:
        return -F_k
    return -F_k + beta * transported_prev_dir


def clamp_step(sigma, alpha_min, alpha_max):
    if sigma > alpha_max:
        return alpha_max
    if sigma < alpha_min:
        return alpha_min
    return sigma


def initial_step(field, manifold, X, F, direction, config):
    """Initial trial step from a transported difference quotient of ``F``.

    Returns ``(alpha, sigma)``; costs one field evaluation.
    """
    eps = config.eps_fd
    probe = eps * direction
    Y = manifold.retract(X, probe)
    Z = (field(Y) - manifold.transport(X, probe, F, Y=Y)) / eps
    num = manifold.inner(X, F, direction)
    den = manifold.inner(Y, Z, manifold.transport(X, probe, direction, Y=Y))
    if not abs(den) > 1e-300 or not np.isfinite(den):
        return 1.0, math.nan
    sigma = abs(num / den)
    return clamp_step(sigma, config.alpha_min, config.alpha_max), sigma


def acceptance_bound(Gamma, delta, alpha, dir_norm, f_k, config):
    return Gamma + delta - config.t1 * alpha**2 * dir_norm**2 - config.t2 * alpha**2 * f_k


def line_search(field, manifold, X, f_k, direction, dir_norm, alpha0, Gamma, delta, config):
    """Two-sided non-monotone backtracking.

    For ``alpha = alpha0 * rho**j`` try ``+alpha * d`` then ``-alpha * d``
    and accept the first trial whose merit is below the acceptance bound.
    Every trial costs one field evaluation.
    """
    alpha = alpha0
    nevals = 0
    for j in range(config.max_backtracks):
        bound = acceptance_bound(Gamma, delta, alpha, dir_norm, f_k, config)
        for sign in (1, -1):
            step = (sign * alpha) * direction
            try:
                Y = manifold.retract(X, step)
                FY = field(Y)
            except ArithmeticError:
                nevals += 1
                continue
            nevals += 1
            res = manifold.norm(Y, FY)
            if 0.5 * res**2 <= bound:
                return LineSearchResult(step, Y, FY, res, alpha, sign, j, nevals)
        alpha *= config.rho
    raise LineSearchFailed(f"no acceptable step after {config.max_backtracks} levels",
                           nevals)


def gamma_update(Gamma, Phi, lam, delta, f_next):
    Phi_next = lam * Phi + 1.0
    Gamma_next = (lam * Phi * (Gamma + delta) + f_next) / Phi_next
    return Gamma_next, Phi_next


def stop_threshold(res_0, M, e_a, e_r):
    return math.sqrt(M) * e_a + e_r * res_0


def check_stop(res_k, res_0, M, e_a, e_r):
    """``||F_k|| / sqrt(M) <= e_a + e_r ||F_0|| / sqrt(M)``."""
    sM = math.sqrt(M)
    return res_k / sM <= e_a + e_r * res_0 / sM


def prp_solve(field, manifold, X0, config=None, stop: Optional[Callable] = None):
    """Run the derivative-free PRP iteration from ``X0``.

    Parameters
    ----------
    field : callable
        ``X -> F(X)``, a tangent vector at ``X``.
    manifold : Stiefel, Spd or GrassmannHorizontal
    X0 : ndarray
        Starting point; must satisfy the manifold's point invariant.
    config : PrpConfig, optional
    stop : callable, optional
        ``stop(res_k, res_0) -> bool`` replacing the default relative /
        absolute rule.

    Returns
    -------
    SolveReport
        Non-convergence is reported through ``status``, never raised.
    """
    config = config or PrpConfig()
    if stop is None:
        def stop(res_k, res_0):
            return check_stop(res_k, res_0, manifold.dim, config.e_a, config.e_r)

    t0 = time.perf_counter()
    X = manifold.validate_point(np.array(X0, dtype=float))
    F = field(X)
    res = manifold.norm(X, F)
    st = PrpState(k=0, X=X, F=F, res=res, Gamma=0.5 * res**2, Phi=1.0, F0_norm=res)
    f0 = st.f
    delta_sum = 0.0
    history = [HistoryRow(0, res, 0.0, 0, 0)]
    report = SolveReport(Status.MAX_ITER, 0, 1, res, res, history, 0.0,
                         max_point_error=manifold.point_error(X))

    while True:
        if stop(st.res, st.F0_norm):
            report.status = Status.CONVERGED
            break
        if st.k >= config.max_iter:
            report.status = Status.MAX_ITER
            break

        if st.k == 0:
            d = compute_direction(st.F)
        else:
            T_F_prev = manifold.transport(st.X_prev, st.prev_step, st.F_prev, Y=st.X)
            T_dir = manifold.transport(st.X_prev, st.prev_step, st.prev_dir, Y=st.X)
            beta = compute_beta(st.F, T_F_prev, st.res_prev,
                                inner=lambda U, V: manifold.inner(st.X, U, V))
            d = compute_direction(st.F, beta, T_dir)
        d_norm = manifold.norm(st.X, d)
        if not d_norm > 0.0 or not np.isfinite(d_norm):
            report.status = Status.LINE_SEARCH_FAILED
            break

        alpha0, _ = initial_step(field, manifold, st.X, st.F, d, config)
        st.nf += 1
        delta = delta_schedule(st.k, st.F0_norm)
        f_k = st.f
        try:
            ls = line_search(field, manifold, st.X, f_k, d, d_norm, alpha0,
                             st.Gamma, delta, config)
        except LineSearchFailed as exc:
            st.nf += exc.args[1]
            report.status = Status.LINE_SEARCH_FAILED
            break
        st.nf += ls.nevals

        X_next, F_next, res_next = ls.X, ls.F, ls.res
        err = manifold.point_error(X_next)
        if err > POINT_TOL:
            X_next = manifold.repair(X_next)
            F_next = field(X_next)
            res_next = manifold.norm(X_next, F_next)
            st.nf += 1
            report.reprojections += 1
            err = manifold.point_error(X_next)
        report.max_point_error = max(report.max_point_error, err)

        f_next = 0.5 * res_next**2
        Gamma_next, Phi_next = gamma_update(st.Gamma, st.Phi, config.lam, delta, f_next)
        delta_sum += delta
        scale = PINEQ_SLACK * max(1.0, abs(st.Gamma) + delta)
        ok = (f_next <= Gamma_next + scale
              and Gamma_next <= st.Gamma + delta + scale
              and f_next <= f0 + delta_sum + scale)
        if not ok:
            report.pineq_violations += 1
            if config.strict:
                raise AssertionError(
                    f"non-monotone bookkeeping violated at k={st.k}: f={f_next}, "
                    f"Gamma={st.Gamma}->{Gamma_next}, delta={delta}")

        report.step_norms.append(ls.alpha * d_norm)
        history.append(HistoryRow(st.k + 1, res_next, ls.alpha, ls.sign, ls.backtracks))

        st.X_prev, st.F_prev, st.res_prev = st.X, st.F, st.res
        st.prev_dir, st.prev_step = d, ls.step
        st.X, st.F, st.res = X_next, F_next, res_next
        st.Gamma, st.Phi = Gamma_next, Phi_next
        st.k += 1

    report.iters = st.k
    report.nf = st.nf
    report.res_final = st.res
    report.x = st.X
    report.wall_time = time.perf_counter() - t0
    return report
