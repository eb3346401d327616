"""Command-line front end: ``solve``, ``bench`` and ``hybrid``.

Exit status: 0 when every trial converged, 2 when any did not, 1 on a
usage error. Settings are resolved as built-in defaults < ``--config`` file
(flat ``key = value`` lines, keys named like the long flags) < flags.
"""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .bench import FIELDS, ExperimentSpec, emit_history, emit_table, run_experiment
from .errors import ConstraintViolated
from .newton import HybridConfig
from .prp import PrpConfig

SEED_ENV = "MZ_SEED"

# dest -> (type, default, help)
PRP_FLAGS = {
    "rho": (float, 0.5, "backtracking factor"),
    "t1": (float, 1e-10, "sufficient-decrease weight on ||d||^2"),
    "t2": (float, 1e-10, "sufficient-decrease weight on f(X_k)"),
    "lam": (float, 0.6, "averaging weight of the non-monotone reference value"),
    "alpha_min": (float, 1e-10, "lower clamp for the initial step"),
    "alpha_max": (float, 1e10, "upper clamp for the initial step"),
    "eps_fd": (float, 1e-8, "probe length of the initial-step difference quotient"),
    "e_a": (float, 1e-6, "absolute stopping tolerance"),
    "e_r": (float, 1e-5, "relative stopping tolerance"),
    "max_iter": (int, 20000, "PRP iteration cap"),
    "max_backtracks": (int, 60, "backtracking levels before the line search fails"),
}
HYBRID_FLAGS = {
    "zeta1": (float, 1e-1, "PRP phase exits once ||F|| < zeta1"),
    "zeta2": (float, 1e-7, "Newton phase exits once ||F|| < zeta2"),
    "varsigma": (float, 1e-8, "cap of the CG forcing term min(varsigma, ||F||)"),
    "cg_max": (int, None, "CG iteration cap per Newton step (default min(p(m-p), 2000))"),
    "newton_max": (int, 50, "Newton iteration cap"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _help(text, default):
    if default is None:
        return text
    if isinstance(default, float):
        return f"{text} (default: {default:g})"
    return f"{text} (default: {default})"


def _flag(dest):
    return "--" + ("lambda" if dest == "lam" else dest.replace("_", "-"))


def _add_common(p):
    p.add_argument("--field", required=True, choices=FIELDS)
    p.add_argument("--m", type=int, required=True, help="ambient size")
    p.add_argument("--p", type=int, default=10,
                   help=_help("number of columns, ignored for logdet-spd", 10))
    p.add_argument("--seed", type=int, default=None,
                   help=f"base seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--config", type=Path, default=None,
                   help="flat key = value file overriding built-in defaults")
    p.add_argument("--spd-retraction", choices=("second_order", "additive"),
                   default="second_order",
                   help=_help("retraction on the SPD cone", "second_order"))
    for dest, (typ, default, text) in PRP_FLAGS.items():
        p.add_argument(_flag(dest), dest=dest, type=typ, default=default,
                       help=_help(text, default))


def _add_batch(p, solver):
    p.add_argument("--trials", type=int, default=10,
                   help=_help("number of random problems", 10))
    p.add_argument("--jobs", type=int, default=1, help=_help("worker threads for trials", 1))
    p.add_argument("--out", type=Path, default=None,
                   help=f"table CSV (default: <field>_<m>x<p>_{solver}.csv)")
    p.add_argument("--history", action="store_true",
                   help="also write <field>_<m>x<p>_<solver>_trial<i>_history.csv per trial")
    p.add_argument("--no-timing", action="store_true",
                   help="write CT as nan so the table is byte-reproducible")


def build_parser():
    fmt = argparse.HelpFormatter
    parser = _Parser(prog="manifold-zeros", formatter_class=fmt,
                     description="Find zeros of tangent vector fields on Stiefel and SPD "
                                 "manifolds with a derivative-free PRP method.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", formatter_class=fmt, help="one seeded PRP solve")
    _add_common(solve)
    solve.add_argument("--history", type=Path, default=None, help="residual history CSV")
    solve.add_argument("--out", type=Path, default=None, help="one-row table CSV")

    bench = sub.add_parser("bench", formatter_class=fmt, help="multi-trial PRP table")
    _add_common(bench)
    _add_batch(bench, "prp")

    hybrid = sub.add_parser("hybrid", formatter_class=fmt, help="multi-trial PRP-Newton table")
    _add_common(hybrid)
    _add_batch(hybrid, "hybrid")
    for dest, (typ, default, text) in HYBRID_FLAGS.items():
        hybrid.add_argument(_flag(dest), dest=dest, type=typ, default=default,
                            help=_help(text, default))
    return parser


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        out["lam" if key == "lambda" else key] = value
    return out


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    if not known.config.is_file():
        raise UsageError(f"config file not found: {known.config}")
    values = read_config(known.config)
    typed = {**{k: v[0] for k, v in PRP_FLAGS.items()},
             **{k: v[0] for k, v in HYBRID_FLAGS.items()},
             "seed": int, "trials": int, "jobs": int, "p": int, "m": int,
             "spd_retraction": str}
    unknown = set(values) - set(typed)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    converted = {k: typed[k](v) for k, v in values.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**converted)
            # a config value satisfies an otherwise required flag
            for a in sp._actions:
                if a.dest in converted:
                    a.required = False


def _prp_config(args):
    return PrpConfig(**{k: getattr(args, k) for k in PRP_FLAGS})


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _spec(args, solver):
    hybrid = None
    if solver == "hybrid":
        hybrid = HybridConfig(**{k: getattr(args, k) for k in HYBRID_FLAGS},
                              prp=_prp_config(args))
    return ExperimentSpec(field=args.field, m=args.m, p=args.p,
                          trials=getattr(args, "trials", 1), solver=solver,
                          seed=_seed(args), prp=_prp_config(args), hybrid=hybrid,
                          spd_retraction=args.spd_retraction)


def _write(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(text)


def _run_batch(args, solver):
    spec = _spec(args, solver)
    rows, results = run_experiment(spec, jobs=max(1, args.jobs))
    out = args.out or Path(f"{spec.file_stem()}.csv")
    _write(out, emit_table(rows, timing=not args.no_timing))
    if args.history:
        for r in results:
            _write(Path(out).parent / f"{spec.file_stem()}_trial{r.trial}_history.csv",
                   emit_history(r.history))
    for row in rows:
        tag = f"[{row.phase}] " if row.phase else ""
        print(f"{tag}m={row.m} p={row.p} DIM={row.DIM} CT={row.CT:.4g}s IT={row.IT:.4g} "
              f"NF={row.NF:.4g} NCG={row.NCG:.4g} Res0={row.Res0:.4e} Res={row.Res:.4e} "
              f"failures={row.failures}")
    return 0 if all(r.converged for r in results) else 2


def _run_solve(args):
    spec = _spec(args, "prp")
    rows, results = run_experiment(replace(spec, trials=1))
    r = results[0]
    if args.history:
        _write(args.history, emit_history(r.history))
    if args.out:
        _write(args.out, emit_table(rows))
    print(f"status={r.status} IT={r.it} NF={r.nf} Res0={r.res0:.4e} Res={r.res:.4e} "
          f"CT={r.ct:.4g}s")
    return 0 if r.converged else 2


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "hybrid" and args.field == "logdet-spd":
            raise UsageError("hybrid needs a Jacobian lift; logdet-spd has none")
        if args.field == "trace-ratio" and not args.m > 2 * args.p:
            raise UsageError("trace-ratio needs m > 2p")
        if args.field != "logdet-spd" and not args.m > args.p >= 1:
            raise UsageError("need m > p >= 1")
        if args.command == "solve":
            return _run_solve(args)
        return _run_batch(args, "prp" if args.command == "bench" else "hybrid")
    except (UsageError, ConstraintViolated, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"manifold-zeros: error: {exc}", file=sys.stderr)
        return 1
