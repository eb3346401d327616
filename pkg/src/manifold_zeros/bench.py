"""Random problem generators, multi-trial experiment runner and CSV emitters.

Random streams are numpy ``PCG64`` generators seeded through
``SeedSequence(base_seed, spawn_key=(trial,))``, so every trial owns an
independent, reproducible stream regardless of execution order.
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import matlin
from .errors import ConstraintViolated, RankDeficient
from .fields import LogDetField, OjaField, TraceRatioField
from .manifold import Spd, Stiefel, manifold_dim
from .newton import HybridConfig, hybrid_solve
from .prp import PrpConfig, prp_solve

FIELDS = ("oja", "trace-ratio", "logdet-spd")
TABLE_HEADER = ["m", "p", "DIM", "CT", "IT", "NF", "NCG", "Res0", "Res", "failures"]
HISTORY_HEADER = ["iter", "residual", "alpha", "sign", "backtracks", "phase"]


def rng_stream(seed, trial=None):
    """PCG64 generator for ``seed``; ``trial`` selects an independent sub-stream."""
    spawn_key = () if trial is None else (int(trial),)
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))


def _qf_gaussian(rng, m, p):
    for attempt in range(2):
        try:
            return matlin.qf(rng.standard_normal((m, p)))[0]
        except RankDeficient:
            if attempt:
                raise


def gen_oja(m, p, rng):
    """SPD ``A`` with uniform(0, 1) eigenvalues and a random Stiefel start."""
    if not m > p >= 1:
        raise ConstraintViolated(f"need m > p >= 1, got m={m}, p={p}")
    D = rng.random(m)
    Q = _qf_gaussian(rng, m, m)
    A = matlin.sym((Q * D) @ Q.T)
    X0 = _qf_gaussian(rng, m, p)
    return A, X0


def gen_trace_ratio(m, p, rng):
    if not m > 2 * p >= 2:
        raise ConstraintViolated(f"trace-ratio needs m > 2p >= 2, got m={m}, p={p}")
    A = matlin.sym(rng.random((m, m)))
    Q = _qf_gaussian(rng, m, m)
    eig = 50.0 + 10.0 * (2.0 * rng.random(m) - 1.0)
    B = matlin.sym((Q * eig) @ Q.T)
    C = matlin.sym(rng.standard_normal((m, m)))
    X0 = _qf_gaussian(rng, m, p)
    return A, B, C, X0


def gen_spd_start(m, rng):
    """``W diag(G) W^T`` with ``G`` uniform on (0.1, 1.1)."""
    G = 0.1 + rng.random(m)
    W = _qf_gaussian(rng, m, m)
    return matlin.sym((W * G) @ W.T)


def make_problem(field_kind, m, p, rng, spd_retraction="second_order"):
    """Return ``(field, manifold, X0)`` for one random instance."""
    if field_kind == "oja":
        A, X0 = gen_oja(m, p, rng)
        return OjaField(A), Stiefel(m, p), X0
    if field_kind == "trace-ratio":
        A, B, C, X0 = gen_trace_ratio(m, p, rng)
        return TraceRatioField(A, B, C), Stiefel(m, p), X0
    if field_kind == "logdet-spd":
        X0 = gen_spd_start(m, rng)
        return LogDetField(spd_retraction), Spd(m, retraction=spd_retraction), X0
    raise ValueError(f"unknown field {field_kind!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    field: str
    m: int
    p: int = 1
    trials: int = 10
    solver: str = "prp"
    seed: int = 0
    prp: PrpConfig = PrpConfig()
    hybrid: Optional[HybridConfig] = None
    spd_retraction: str = "second_order"

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"unknown field {self.field!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.solver not in ("prp", "hybrid"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.solver == "hybrid" and self.field == "logdet-spd":
            raise ValueError("the hybrid solver needs a Jacobian lift; logdet-spd has none")
        if self.field == "trace-ratio" and not self.m > 2 * self.p:
            raise ConstraintViolated("trace-ratio needs m > 2p")

    @property
    def p_eff(self):
        return self.m if self.field == "logdet-spd" else self.p

    @property
    def dim(self):
        if self.field == "logdet-spd":
            return manifold_dim("spd", self.m)
        return manifold_dim("stiefel", self.m, self.p)

    def file_stem(self):
        return f"{self.field}_{self.m}x{self.p_eff}_{self.solver}"


@dataclass
class TrialResult:
    trial: int
    converged: bool
    status: str
    ct: float
    it: int
    nf: int
    ncg: int
    res0: float
    res: float
    history: list
    phases: Optional[list] = None  # hybrid: [(phase, CT, IT, NF, NCG, Res0, Res), ...]
    pineq_violations: int = 0
    reprojections: int = 0
    max_point_error: float = 0.0
    x: Optional[np.ndarray] = None


@dataclass
class TableRow:
    m: int
    p: int
    DIM: int
    CT: float
    IT: float
    NF: float
    NCG: float
    Res0: float
    Res: float
    failures: int
    phase: Optional[str] = None

    @property
    def flagged(self):
        return self.failures > 0


def run_trial(spec, trial):
    rng = rng_stream(spec.seed, trial)
    fld, mfd, X0 = make_problem(spec.field, spec.m, spec.p, rng, spec.spd_retraction)
    if spec.solver == "prp":
        rep = prp_solve(fld, mfd, X0, spec.prp)
        history = [tuple(row) + ("prp",) for row in rep.history]
        return TrialResult(trial, rep.converged, rep.status.value, rep.wall_time,
                           rep.iters, rep.nf, 0, rep.res0, rep.res_final, history,
                           pineq_violations=rep.pineq_violations,
                           reprojections=rep.reprojections,
                           max_point_error=rep.max_point_error, x=rep.x)
    cfg = spec.hybrid or HybridConfig(prp=spec.prp)
    rep = hybrid_solve(fld, X0, cfg)
    prp_rep, nw = rep.prp_phase, rep.newton_phase
    history = [tuple(row) + ("prp",) for row in prp_rep.history]
    offset = prp_rep.iters
    history += [(offset + r.k, r.residual, r.alpha, r.sign, r.backtracks, "newton")
                for r in nw.history[1:]]
    return TrialResult(trial, rep.converged, rep.status.value,
                       prp_rep.wall_time + nw.wall_time,
                       prp_rep.iters + nw.iters, prp_rep.nf + nw.nf, nw.ncg,
                       prp_rep.res0, nw.res_final if nw.iters or nw.nf else prp_rep.res_final,
                       history, phases=rep.phase_rows(),
                       pineq_violations=prp_rep.pineq_violations,
                       reprojections=prp_rep.reprojections,
                       max_point_error=max(prp_rep.max_point_error, nw.max_point_error),
                       x=rep.x)


def _mean(values):
    return math.fsum(values) / len(values) if values else math.nan


def aggregate(spec, results):
    """Fold trial results (in trial-index order) into table rows."""
    results = sorted(results, key=lambda r: r.trial)
    ok = [r for r in results if r.converged]
    failures = len(results) - len(ok)
    base = dict(m=spec.m, p=spec.p_eff, DIM=spec.dim, failures=failures)
    if spec.solver == "prp":
        return [TableRow(CT=_mean([r.ct for r in results]),
                         IT=_mean([r.it for r in ok]), NF=_mean([r.nf for r in ok]),
                         NCG=0.0, Res0=_mean([r.res0 for r in ok]),
                         Res=_mean([r.res for r in ok]), **base)]
    rows = []
    for i, name in enumerate(("prp", "newton")):
        ph = [r.phases[i] for r in ok]
        rows.append(TableRow(CT=_mean([r.phases[i][1] for r in results]),
                             IT=_mean([x[2] for x in ph]), NF=_mean([x[3] for x in ph]),
                             NCG=_mean([x[4] for x in ph]), Res0=_mean([x[5] for x in ph]),
                             Res=_mean([x[6] for x in ph]), phase=name, **base))
    return rows


def run_experiment(spec, jobs=1, order=None):
    """Run ``spec.trials`` seeded solves and aggregate them.

    Returns ``(rows, results)``; ``rows`` holds one TableRow for PRP runs and
    one per phase for hybrid runs. ``order`` permutes execution order only.
    """
    order = list(range(spec.trials)) if order is None else list(order)
    if sorted(order) != list(range(spec.trials)):
        raise ValueError("order must be a permutation of the trial indices")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda t: run_trial(spec, t), order))
    else:
        results = [run_trial(spec, t) for t in order]
    results.sort(key=lambda r: r.trial)
    return aggregate(spec, results), results


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.3e}"


def emit_table(rows, timing=True):
    """CSV text for table rows; floats in 4-significant-digit scientific notation.

    Hybrid rows carry a trailing ``phase`` column. With ``timing=False`` the
    CT column is written as ``nan`` so output is byte-reproducible.
    """
    header = list(TABLE_HEADER)
    with_phase = any(r.phase is not None for r in rows)
    if with_phase:
        header.append("phase")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        ct = r.CT if timing else math.nan
        line = [r.m, r.p, r.DIM, _fmt(ct), _fmt(r.IT), _fmt(r.NF), _fmt(r.NCG),
                _fmt(r.Res0), _fmt(r.Res), r.failures]
        if with_phase:
            line.append(r.phase or "")
        w.writerow([_fmt(v) if isinstance(v, int) else v for v in line])
    return buf.getvalue()


def emit_history(trace):
    """CSV text for a residual trace of ``(iter, residual, alpha, sign, backtracks, phase)`` rows."""
    if not trace:
        raise ValueError("empty trace")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for it, res, alpha, sign, bt, *rest in trace:
        phase = rest[0] if rest else "prp"
        w.writerow([int(it), repr(float(res)), repr(float(alpha)), int(sign), int(bt), phase])
    return buf.getvalue()
