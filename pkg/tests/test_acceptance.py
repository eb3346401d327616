"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import functools
import time

import numpy as np

from manifold_zeros import bench, matlin
from manifold_zeros.cli import main
from manifold_zeros.fields import LogDetField, OjaField, TraceRatioField, fd_field_derivative
from manifold_zeros.manifold import GrassmannHorizontal, Spd, manifold_dim
from manifold_zeros.newton import HybridConfig
from manifold_zeros.prp import check_stop, stop_threshold

from conftest import ACCEPTANCE_LINES, random_horizontal, random_spd, random_stiefel, random_sym

SEED = 0  # the CLI default
TRIALS = 10


def verdict(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  [{n:2d}] {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# Shared runs, reused by the invariant criteria 5 and 9.

@functools.lru_cache(maxsize=None)
def oja_prp_runs():
    spec = bench.ExperimentSpec("oja", 200, 10, trials=TRIALS, seed=SEED)
    return timed(lambda: bench.run_experiment(spec))


@functools.lru_cache(maxsize=None)
def logdet_runs():
    spec = bench.ExperimentSpec("logdet-spd", 100, trials=TRIALS, seed=SEED)
    return timed(lambda: bench.run_experiment(spec))


@functools.lru_cache(maxsize=None)
def hybrid_runs(zeta1):
    spec = bench.ExperimentSpec("oja", 200, 10, trials=TRIALS, seed=SEED, solver="hybrid",
                                hybrid=HybridConfig(zeta1=zeta1, zeta2=1e-7))
    return timed(lambda: bench.run_experiment(spec))


def all_results():
    runs = [oja_prp_runs(), logdet_runs(), hybrid_runs(1e-3), hybrid_runs(1e-1)]
    return [r for (_, results), _ in runs for r in results]


def test_criterion_01_dimensions():
    got = (manifold_dim("stiefel", 1000, 30), manifold_dim("stiefel", 200, 30),
           manifold_dim("spd", 100))
    verdict(1, "dimension formulas", got == (29535, 5535, 5050), f"DIM = {got}")


def test_criterion_02_spd_residual():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    field = LogDetField()
    for _ in range(100):
        m = int(rng.integers(2, 201))
        X = random_spd(rng, m, 0.05, 2.0)
        res = Spd(m).norm(X, field(X))
        closed = 2.0 * np.sqrt(m) * abs(np.linalg.slogdet(X)[1])
        worst = max(worst, abs(res - closed) / closed)
    res0 = [residual for residual in
            (Spd(100).norm(X, field(X)) for X in
             (bench.gen_spd_start(100, bench.rng_stream(SEED, t)) for t in range(TRIALS)))]
    mean = float(np.mean(res0))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and 1.0e3 <= mean <= 1.7e3 and elapsed < 5.0
    verdict(2, "SPD residual closed form", ok,
            f"max rel err {worst:.2e}, mean Res0 {mean:.4e} (reported 1.3313e+03), "
            f"{elapsed:.2f}s")


def test_criterion_03_stopping_rule():
    thr = stop_threshold(1.5558, 29535, 1e-6, 1e-5)
    ok = abs(thr - 1.874e-4) <= 1e-3 * 1.874e-4 and check_stop(1.8068e-4, 1.5558, 29535,
                                                               1e-6, 1e-5)
    verdict(3, "stopping rule vs reported table", ok,
            f"threshold {thr:.4e}, reported Res 1.8068e-04 accepted")


def test_criterion_04_jacobian_lifts():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = {"oja": 0.0, "trace-ratio": 0.0}
    for _ in range(20):
        p = int(rng.integers(1, 6))
        m = int(rng.integers(2 * p + 1, 51))
        X = random_stiefel(rng, m, p)
        xi = random_horizontal(rng, X)
        fields = {
            "oja": OjaField(random_spd(rng, m, 0.0, 1.0)),
            "trace-ratio": TraceRatioField(matlin.sym(rng.random((m, m))),
                                           random_spd(rng, m, 40.0, 60.0), random_sym(rng, m)),
        }
        for name, f in fields.items():
            ref = fd_field_derivative(f, GrassmannHorizontal(m, p), X, xi, h=1e-6, central=True)
            err = np.linalg.norm(f.jac_lift(X, xi) - ref) / np.linalg.norm(ref)
            worst[name] = max(worst[name], err)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and elapsed < 10.0
    verdict(4, "Jacobian lifts vs central differences", ok,
            f"max rel err oja {worst['oja']:.2e}, trace-ratio {worst['trace-ratio']:.2e}, "
            f"{elapsed:.2f}s")


def test_criterion_05_nonmonotone_bookkeeping():
    results = [r for r in all_results() if r.converged]
    fired = sum(r.pineq_violations for r in results)
    verdict(5, "non-monotone inequalities", fired == 0,
            f"{fired} violations over {len(results)} converged runs")


def test_criterion_06_oja_desk_scale():
    ((row,), results), elapsed = oja_prp_runs()
    good = [r for r in results if r.converged and r.it <= 600]
    ok = len(good) >= 9 and elapsed < 60.0
    verdict(6, "Oja m=200 p=10 PRP", ok,
            f"{len(good)}/{TRIALS} converged within 600 it, mean IT {row.IT:.1f}, "
            f"max IT {max(r.it for r in results)}, {elapsed:.2f}s")


def test_criterion_07_logdet_desk_scale():
    ((row,), results), elapsed = logdet_runs()
    worst = 0.0
    ok = elapsed < 5.0
    for r in results:
        X = r.x
        lndet = abs(np.linalg.slogdet(X)[1])
        bound = stop_threshold(r.res0, 5050, 1e-6, 1e-5) / (2 * np.sqrt(100))
        ok &= r.converged and r.it <= 30 and lndet <= bound
        worst = max(worst, lndet / bound)
    verdict(7, "log-det m=100 PRP", bool(ok),
            f"IT mean {row.IT:.1f} max {max(r.it for r in results)}, "
            f"max |ln det| / bound {worst:.3f}, {elapsed:.2f}s")


def test_criterion_08_hybrid_tail():
    (rows_tight, res_tight), t_tight = hybrid_runs(1e-3)
    (rows_loose, res_loose), t_loose = hybrid_runs(1e-1)
    newton_it = lambda r: r.phases[1][2]  # noqa: E731
    tight_ok = all(r.converged and newton_it(r) <= 6 and r.res < 1e-7 for r in res_tight)
    loose_ok = all(r.converged and newton_it(r) <= 30 and r.res < 1e-7 for r in res_loose)
    ok = tight_ok and loose_ok and t_tight + t_loose < 120.0
    verdict(8, "hybrid PRP-Newton tail", ok,
            f"zeta1=1e-3: Newton IT max {max(map(newton_it, res_tight))}; "
            f"zeta1=1e-1: Newton IT max {max(map(newton_it, res_loose))}; "
            f"{t_tight + t_loose:.2f}s")


def test_criterion_09_invariants():
    results = all_results()
    worst = max(r.max_point_error for r in results)
    repro = sum(r.reprojections for r in results if r.converged)
    ok = worst <= 1e-10 and repro == 0
    verdict(9, "manifold invariants", ok,
            f"max point error {worst:.2e} over {len(results)} runs, {repro} re-projections")


def test_criterion_10_determinism(tmp_path):
    cmd = ["bench", "--field", "oja", "--m", "200", "--p", "10", "--trials", "10",
           "--seed", str(SEED)]
    paths = [tmp_path / f"run{i}.csv" for i in range(2)]
    codes = [main(cmd + ["--out", str(p)]) for p in paths]

    def masked(path):
        lines = path.read_text().splitlines()
        ct = lines[0].split(",").index("CT")
        return [",".join(v if j != ct else "*" for j, v in enumerate(ln.split(",")))
                for ln in lines]

    same_masked = masked(paths[0]) == masked(paths[1])
    quiet = [tmp_path / f"quiet{i}.csv" for i in range(2)]
    for p in quiet:
        main(cmd + ["--no-timing", "--out", str(p)])
    same_bytes = quiet[0].read_bytes() == quiet[1].read_bytes()
    ok = codes == [0, 0] and same_masked and same_bytes
    verdict(10, "bench CSV determinism", ok,
            f"identical apart from wall-clock CT: {same_masked}; "
            f"--no-timing bytes identical: {same_bytes}")
