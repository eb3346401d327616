import csv
import io
import math

import numpy as np
import pytest

from manifold_zeros import bench, matlin
from manifold_zeros.errors import ConstraintViolated
from manifold_zeros.prp import PrpConfig, stop_threshold


def is_spd(S):
    try:
        matlin.cholesky(S)
        return True
    except ArithmeticError:
        return False


# -- random streams and generators --------------------------------------------

def test_streams_reproducible_and_independent():
    a = bench.rng_stream(7, 3).random(5)
    assert np.array_equal(a, bench.rng_stream(7, 3).random(5))
    assert not np.array_equal(a, bench.rng_stream(7, 4).random(5))
    assert not np.array_equal(a, bench.rng_stream(8, 3).random(5))


def test_gen_oja_properties():
    A, X0 = bench.gen_oja(40, 3, bench.rng_stream(1))
    np.testing.assert_array_equal(A, A.T)
    assert is_spd(A) and is_spd(np.eye(40) - A)  # spectrum inside (0, 1)
    np.testing.assert_allclose(X0.T @ X0, np.eye(3), atol=1e-14)
    A2, X2 = bench.gen_oja(40, 3, bench.rng_stream(1))
    assert np.array_equal(A, A2) and np.array_equal(X0, X2)
    with pytest.raises(ConstraintViolated):
        bench.gen_oja(3, 3, bench.rng_stream(1))


def test_gen_oja_mean_trace():
    # uniform(0, 1) spectrum: tr(A) / m concentrates at 1/2
    means = [np.trace(bench.gen_oja(200, 1, bench.rng_stream(s))[0]) / 200 for s in range(50)]
    assert 0.4 <= np.mean(means) <= 0.6


def test_gen_trace_ratio_properties():
    A, B, C, X0 = bench.gen_trace_ratio(30, 4, bench.rng_stream(2))
    for S in (A, B, C):
        np.testing.assert_array_equal(S, S.T)
    assert np.all((A >= 0) & (A <= 1))
    assert is_spd(B - 40 * np.eye(30)) and is_spd(60 * np.eye(30) - B)
    np.testing.assert_allclose(X0.T @ X0, np.eye(4), atol=1e-14)
    with pytest.raises(ConstraintViolated):
        bench.gen_trace_ratio(8, 4, bench.rng_stream(2))


def test_gen_spd_start_properties():
    X = bench.gen_spd_start(50, bench.rng_stream(3))
    np.testing.assert_array_equal(X, X.T)
    assert is_spd(X - 0.1 * np.eye(50)) and is_spd(1.1 * np.eye(50) - X)
    # det < 1 on every seed at m = 100
    assert all(matlin.chol_logdet(bench.gen_spd_start(100, bench.rng_stream(s)))[0] < 0
               for s in range(100))


def test_make_problem_rejects_unknown():
    with pytest.raises(ValueError):
        bench.make_problem("heat", 5, 1, bench.rng_stream(0))


# -- experiments --------------------------------------------------------------

def test_spec_metadata():
    spec = bench.ExperimentSpec("trace-ratio", 200, 30)
    assert spec.dim == 5535 and spec.file_stem() == "trace-ratio_200x30_prp"
    spd = bench.ExperimentSpec("logdet-spd", 100, solver="prp")
    assert spd.dim == 5050 and spd.p_eff == 100
    with pytest.raises(ValueError):
        bench.ExperimentSpec("logdet-spd", 100, solver="hybrid")
    with pytest.raises(ConstraintViolated):
        bench.ExperimentSpec("trace-ratio", 10, 5)


def test_single_trial_row_equals_trial():
    spec = bench.ExperimentSpec("oja", 40, 3, trials=1, seed=5)
    (row,), (r,) = bench.run_experiment(spec)
    assert (row.IT, row.NF, row.Res0, row.Res) == (r.it, r.nf, r.res0, r.res)
    assert row.DIM == 40 * 3 - 6 and row.failures == 0 and not row.flagged


def test_order_and_jobs_do_not_change_rows():
    spec = bench.ExperimentSpec("oja", 40, 3, trials=4, seed=5)
    base, _ = bench.run_experiment(spec)
    perm, _ = bench.run_experiment(spec, order=[2, 0, 3, 1])
    par, _ = bench.run_experiment(spec, jobs=2)
    strip = lambda rows: [(r.IT, r.NF, r.Res0, r.Res) for r in rows]  # noqa: E731
    assert strip(base) == strip(perm) == strip(par)
    with pytest.raises(ValueError):
        bench.run_experiment(spec, order=[0, 1, 2])


def test_failed_trials_are_flagged_and_excluded():
    spec = bench.ExperimentSpec("oja", 40, 3, trials=3, seed=5, prp=PrpConfig(max_iter=2))
    (row,), results = bench.run_experiment(spec)
    assert row.failures == 3 and row.flagged
    assert math.isnan(row.IT) and math.isnan(row.Res)
    assert not math.isnan(row.CT)
    assert all(r.status == "max_iter" for r in results)


def test_hybrid_experiment_rows():
    from manifold_zeros.newton import HybridConfig
    spec = bench.ExperimentSpec("oja", 40, 3, trials=2, seed=1, solver="hybrid",
                                hybrid=HybridConfig(zeta1=1e-2))
    rows, results = bench.run_experiment(spec)
    assert [r.phase for r in rows] == ["prp", "newton"]
    assert all(r.converged for r in results)
    assert rows[1].Res < 1e-7 and rows[0].NCG == 0.0 and rows[1].NCG >= 1
    hist = results[0].history
    assert [h[0] for h in hist] == list(range(len(hist)))
    assert {h[5] for h in hist} == {"prp", "newton"}


# -- CSV emitters -------------------------------------------------------------

def test_emit_table_format():
    row = bench.TableRow(200, 10, 1945, 0.0123456, 93.5, 188.0, 0.0, 0.89371, 5.0681e-5, 0)
    text = bench.emit_table([row])
    lines = text.splitlines()
    assert lines[0] == "m,p,DIM,CT,IT,NF,NCG,Res0,Res,failures"
    assert lines[1] == "200,10,1945,1.235e-02,9.350e+01,1.880e+02,0.000e+00,8.937e-01,5.068e-05,0"
    back = list(csv.DictReader(io.StringIO(text)))[0]
    assert float(back["Res"]) == pytest.approx(5.0681e-5, rel=1e-3)
    assert bench.emit_table([row], timing=False).splitlines()[1].split(",")[3] == "nan"
    assert bench.emit_table([]) == "m,p,DIM,CT,IT,NF,NCG,Res0,Res,failures\n"


def test_emit_table_phase_column():
    rows = [bench.TableRow(40, 3, 114, 0.1, 5.0, 11.0, 0.0, 1.0, 1e-2, 0, phase="prp"),
            bench.TableRow(40, 3, 114, 0.1, 2.0, 3.0, 20.0, 1e-2, 1e-9, 0, phase="newton")]
    lines = bench.emit_table(rows).splitlines()
    assert lines[0].endswith(",failures,phase")
    assert lines[1].endswith(",prp") and lines[2].endswith(",newton")


def test_emit_history_from_solve():
    spec = bench.ExperimentSpec("logdet-spd", 100, trials=1, seed=1)
    _, (r,) = bench.run_experiment(spec)
    text = bench.emit_history(r.history)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == bench.HISTORY_HEADER
    assert len(rows) - 1 == r.it + 1 <= 31
    res = [float(x[1]) for x in rows[1:]]
    assert res[0] == r.res0  # repr round-trips exactly
    assert res[-1] <= stop_threshold(res[0], 5050, 1e-6, 1e-5)
    assert math.log10(res[0] / res[-1]) >= 6
    with pytest.raises(ValueError):
        bench.emit_history([])
