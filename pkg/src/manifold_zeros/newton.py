"""Hybrid PRP -> Riemannian Newton solver on the Grassmann quotient.

The PRP phase runs until ``||F|| < zeta1``; then inexact Newton steps are
taken on Gr(p, m), with the Newton equation ``J[D] = -F`` solved in the
horizontal space by conjugate gradients to the forcing tolerance
``min(varsigma, ||F||)``.
"""

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import matlin
from .manifold import Stiefel, gr_horizontal_project
from .prp import HistoryRow, PrpConfig, SolveReport, Status, prp_solve

CURVATURE_FLOOR = 1e-14


@dataclass(frozen=True)
class HybridConfig:
    zeta1: float = 1e-1
    zeta2: float = 1e-7
    varsigma: float = 1e-8
    cg_max: Optional[int] = None
    newton_max: int = 50
    prp: PrpConfig = PrpConfig()

    def __post_init__(self):
        if not 0.0 < self.zeta2 < self.zeta1:
            raise ValueError("need 0 < zeta2 < zeta1")
        if not 0.0 < self.varsigma < 1.0:
            raise ValueError("varsigma must lie in (0, 1)")

    def cg_cap(self, m, p):
        if self.cg_max is not None:
            return self.cg_max
        return min(p * (m - p), 2000)


class CgResult(NamedTuple):
    x: np.ndarray
    ncg: int
    converged: bool
    flag: str  # "converged", "cap", "curvature" or "zero_rhs"
    residual: float


def _frob(U, V):
    return float(np.vdot(U, V))


def truncated_cg(apply_J, rhs, rel_tol, cap, inner=_frob):
    """Conjugate gradients for ``J x = rhs`` started from ``x = 0``.

    Stops when the recursive residual drops below ``rel_tol * ||rhs||``,
    after ``cap`` operator applications, or when ``<d, J d>`` is numerically
    zero relative to ``||d||^2``. The iterate with the smallest residual seen
    is returned.
    """
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    rr = inner(r, r)
    rhs_norm = np.sqrt(rr)
    if rhs_norm == 0.0:
        return CgResult(x, 0, True, "zero_rhs", 0.0)
    target = rel_tol * rhs_norm
    d = r.copy()
    best_x, best_res = x.copy(), rhs_norm
    ncg = 0
    flag = "cap"
    while ncg < cap:
        Jd = apply_J(d)
        ncg += 1
        curv = inner(d, Jd)
        if abs(curv) <= CURVATURE_FLOOR * inner(d, d):
            flag = "curvature"
            break
        a = rr / curv
        x = x + a * d
        r = r - a * Jd
        rr_new = inner(r, r)
        res = np.sqrt(rr_new)
        if res < best_res:
            best_x, best_res = x, res
        if res <= target:
            flag = "converged"
            break
        d = r + (rr_new / rr) * d
        rr = rr_new
    return CgResult(best_x, ncg, flag == "converged", flag, float(best_res))


def forcing_tol(res, varsigma):
    return min(varsigma, res)


class NewtonStep(NamedTuple):
    X: np.ndarray
    ncg: int
    nf: int
    cg: CgResult


def newton_step(field, X, cfg, F=None):
    """One inexact Newton step on Gr(p, m) followed by the qf retraction."""
    nf = 0
    if F is None:
        F = field(X)
        nf = 1
    m, p = X.shape
    rhs = gr_horizontal_project(X, -F)
    res = float(np.linalg.norm(F))
    cg = truncated_cg(field.jacobian(X), rhs, forcing_tol(res, cfg.varsigma),
                      cfg.cg_cap(m, p))
    D = cg.x
    if not np.any(D):
        D = rhs
    return NewtonStep(matlin.qf(X + D)[0], cg.ncg, nf, cg)


@dataclass
class NewtonReport:
    iters: int = 0
    nf: int = 0
    ncg: int = 0
    ncg_steps: list = field(default_factory=list)
    res0: float = float("nan")
    res_final: float = float("nan")
    history: list = field(default_factory=list)
    wall_time: float = 0.0
    nonmonotone_steps: int = 0
    degraded_solves: int = 0
    max_point_error: float = 0.0
    x: Optional[np.ndarray] = None


@dataclass
class HybridReport:
    prp_phase: SolveReport
    newton_phase: NewtonReport
    status: Status

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    @property
    def x(self):
        if self.newton_phase.x is not None:
            return self.newton_phase.x
        return self.prp_phase.x

    def phase_rows(self):
        """``(phase, CT, IT, NF, NCG, Res0, Res)`` for each phase."""
        p, n = self.prp_phase, self.newton_phase
        return [
            ("prp", p.wall_time, p.iters, p.nf, 0, p.res0, p.res_final),
            ("newton", n.wall_time, n.iters, n.nf, n.ncg, n.res0, n.res_final),
        ]


def newton_phase(field, X, cfg):
    t0 = time.perf_counter()
    rep = NewtonReport()
    rep.max_point_error = float(np.linalg.norm(X.T @ X - np.eye(X.shape[1])))
    F = field(X)
    rep.nf = 1
    res = float(np.linalg.norm(F))
    rep.res0 = res
    rep.history.append(HistoryRow(0, res, 0.0, 0, 0))
    status = Status.MAX_ITER
    while True:
        if res < cfg.zeta2:
            status = Status.CONVERGED
            break
        if rep.iters >= cfg.newton_max:
            break
        step = newton_step(field, X, cfg, F=F)
        X = step.X
        rep.max_point_error = max(rep.max_point_error,
                                  float(np.linalg.norm(X.T @ X - np.eye(X.shape[1]))))
        F = field(X)
        rep.nf += 1
        new_res = float(np.linalg.norm(F))
        rep.iters += 1
        rep.ncg += step.ncg
        rep.ncg_steps.append(step.ncg)
        rep.history.append(HistoryRow(rep.iters, new_res, 1.0, 1, 0))
        if not step.cg.converged:
            rep.degraded_solves += 1
        if not new_res < res:
            rep.nonmonotone_steps += 1
            if not step.cg.converged:
                res = new_res
                status = Status.NEWTON_STALLED
                break
        res = new_res
    rep.res_final = res
    rep.x = X
    rep.wall_time = time.perf_counter() - t0
    return rep, status


def hybrid_solve(field, X0, cfg=None):
    """PRP until ``||F|| < zeta1``, then Newton until ``||F|| < zeta2``."""
    cfg = cfg or HybridConfig()
    if not getattr(field, "has_jacobian", False):
        raise ValueError(f"field {getattr(field, 'kind', field)!r} has no Jacobian lift")
    X0 = np.asarray(X0, dtype=float)
    manifold = Stiefel(*X0.shape)
    zeta1 = cfg.zeta1
    prp_rep = prp_solve(field, manifold, X0, cfg.prp, stop=lambda r, r0: r < zeta1)
    if not prp_rep.converged:
        return HybridReport(prp_rep, NewtonReport(), prp_rep.status)
    newton_rep, status = newton_phase(field, prp_rep.x, cfg)
    return HybridReport(prp_rep, newton_rep, status)
