"""Command-line entry point: ``singplap <command> --config run.toml``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .barriers import barrier_linear_eig, barrier_log_eig, barrier_power_eig
from .config import load_config
from .errors import ConfigError, SingPlapError
from .io import svg_plot, write_csv, write_json
from .problem import Regime
from .runner import (RunContext, build_report, run_checks, run_sweep_point,
                     sweep_points, worker_count)

EXIT_PASS, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

RATE_CHECKS = ("rate", "log", "limit", "gradient", "sobolev", "blowup")
COMPARE_CHECKS = ("sandwich", "wcp", "lambda")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError:
        raise
    except (SingPlapError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


class Session:
    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config)
        self.out = Path(args.out or self.cfg.output.dir)
        self.formats = tuple(args.format) if args.format else self.cfg.output.formats
        self.level = args.mesh_level
        self.seed = args.seed

    def wants(self, fmt):
        return fmt in self.formats

    def json(self, name, obj):
        if self.wants("json"):
            write_json(self.out / f"{name}.json", obj)

    def csv(self, name, header, cols):
        if self.wants("csv"):
            write_csv(self.out / f"{name}.csv", header, cols)

    def svg(self, name, *a, **kw):
        if self.wants("svg"):
            from .io import atomic_write
            atomic_write(self.out / f"{name}.svg", svg_plot(*a, **kw))


def _checks_report(s: Session, names, tag):
    wanted = [c for c in names if c in s.cfg.analysis.checks] or list(names[:1])
    ctx, reps = _stage("analysis", run_checks, s.cfg, s.level, s.seed, wanted)
    rep = build_report(s.cfg, reps, ctx)
    s.json(tag, rep)
    return ctx, reps, rep


def _verdict_code(reps):
    return EXIT_CHECK if any(r.verdict == "fail" for r in reps) else EXIT_PASS


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(s: Session):
    ctx = RunContext(s.cfg, s.level, s.seed)
    if s.args.dim == 2 and not ctx.is_2d:
        raise ConfigError("--dim 2 needs a rectangle or disk domain", "domain.variant")
    if s.args.dim == 1 and ctx.is_2d:
        raise ConfigError("--dim 1 needs an interval, annulus or ball domain", "domain.variant")
    f = _stage("solve", ctx.field)
    meta = {k: v for k, v in f.meta.items() if k != "cap"}
    s.json("field", {"schema": "report_v1", "provenance": ctx.provenance(), "meta": meta})
    if ctx.is_2d:
        g = f.grid
        s.csv("field", ["x", "y", "u", "ux", "uy"], [g.x, g.y, f.values, f.gradient[:, 0],
                                                     f.gradient[:, 1]])
    else:
        s.csv("field", ["x", "u", "du"], [f.x, f.values, f.gradient])
        s.svg("field", [("u", f.x, f.values, "line")], "solution", "x", "u")
    return EXIT_PASS


def cmd_eigen(s: Session):
    ctx = RunContext(s.cfg, s.level, s.seed)
    if ctx.is_2d:
        raise ConfigError("eigen needs a 1D or radial domain", "domain.variant")
    eig = _stage("eigen", ctx.eig)
    phi = eig.phi1
    s.json("eigen", {"schema": "report_v1", "provenance": ctx.provenance(),
                     "lambda1": eig.lambda1, "p": eig.p, "iterations": eig.iterations})
    s.csv("eigen", ["x", "phi1", "dphi1"], [phi.x, phi.values, phi.gradient])
    return EXIT_PASS


def cmd_barriers(s: Session):
    ctx = RunContext(s.cfg, s.level, s.seed)
    if ctx.is_2d:
        raise ConfigError("barriers need a 1D or radial domain", "domain.variant")
    pr, sc = ctx.problem, s.cfg.analysis.s
    eig = _stage("eigen", ctx.eig)
    if pr.regime is Regime.STRONG:
        b = _stage("barriers", barrier_power_eig, sc, pr.p, pr.gamma, eig, pr.theta)
    elif pr.regime is Regime.CRITICAL:
        b = _stage("barriers", barrier_log_eig, sc, pr.p, pr.theta, pr.q, eig)
    else:
        b = _stage("barriers", barrier_linear_eig, sc, pr.p, pr.gamma, pr.theta, eig)
    inner = slice(1, -1)
    summary = {"schema": "report_v1", "provenance": ctx.provenance(), "family": b.family,
               "s": b.s, "regime": b.regime.value,
               "coeff_a": {"min": float(np.min(b.coeff_a[inner])), "max": float(np.max(b.coeff_a[inner]))},
               "coeff_b": {"min": float(np.min(b.coeff_b[inner])), "max": float(np.max(b.coeff_b[inner]))}}
    summary["extra"] = {k: v for k, v in b.extra.items() if np.ndim(v) == 0}
    s.json("barriers", summary)
    s.csv("barriers", ["x", "w", "a", "b"], [b.mesh.nodes, b.values, b.coeff_a, b.coeff_b])
    return EXIT_PASS


def cmd_rates(s: Session):
    ctx, reps, _ = _checks_report(s, RATE_CHECKS, "rates")
    f = ctx.field()
    if not ctx.is_2d:
        d, u, g = f.side_arrays("left")
        keep = d > 0
        pr = ctx.problem
        m = pr.boundary_exponent
        s.csv("layer", ["d", "u", "du", "u_over_d_m"], [d[keep], u[keep], g[keep], u[keep] / d[keep] ** m])
        s.svg("rates", [("u", d[keep], u[keep], "line")], "boundary layer", "d", "u",
              logx=True, logy=True)
    return _verdict_code(reps)


def cmd_compare(s: Session):
    _, reps, _ = _checks_report(s, COMPARE_CHECKS, "compare")
    return _verdict_code(reps)


def cmd_symmetry(s: Session):
    _, reps, _ = _checks_report(s, ("symmetry",), "symmetry")
    sw = reps[0].measured.get("sweep")
    if sw:
        s.csv("symmetry", ["lambda", "min_difference"], [sw["lambdas"], sw["min_difference"]])
    return _verdict_code(reps)


def cmd_report(s: Session):
    ctx, reps = _stage("analysis", run_checks, s.cfg, s.level, s.seed)
    rep = build_report(s.cfg, reps, ctx)
    s.json("report", rep)
    return _verdict_code(reps)


def _sweep_task(args):
    cfg, point, seed = args
    try:
        return run_sweep_point(cfg, point, seed)
    except (SingPlapError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return {**point, "verdict": "error", "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(s: Session):
    pts = sweep_points(s.cfg)
    if not pts:
        return EXIT_PASS
    if s.level is not None:
        pts = [{**p, "mesh_level": p.get("mesh_level", s.level)} for p in pts]
    tasks = [(s.cfg, p, s.seed) for p in pts]
    n = worker_count(len(tasks))
    if n == 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(n) as ex:
            rows = list(ex.map(_sweep_task, tasks))
    keys = [k for k in ("gamma", "p", "theta", "mesh_level") if k in pts[0]]
    cols = keys + ["regime", "check", "verdict", "exponent", "predicted", "r2", "c"]
    s.csv("sweep", cols, [[r.get(k, "") for r in rows] for k in cols])
    failed = [r for r in rows if r["verdict"] in ("fail", "error")]
    s.json("sweep", {"schema": "report_v1", "config_hash": s.cfg.content_hash, "rows": rows,
                     "failed_points": failed, "passed": not failed})
    strong = [r for r in rows if r.get("regime") == Regime.STRONG.value and "gamma" in r]
    if strong:
        g = np.array([r["gamma"] for r in strong])
        order = np.argsort(g)
        pvals = np.array([r.get("p", s.cfg.problem.p) for r in strong])[order]
        gg = np.linspace(g.min(), g.max(), 200)
        series = [("fitted", g[order], np.array([r["exponent"] for r in strong])[order], "points")]
        if np.all(pvals == pvals[0]):
            series.append(("p/(gamma+p-1)", gg, pvals[0] / (gg + pvals[0] - 1), "line"))
        s.svg("sweep", series, "boundary exponent", "gamma", "exponent")
    for r in failed:
        print(f"failed grid point: {r}", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_PASS


COMMANDS = {"solve": cmd_solve, "eigen": cmd_eigen, "barriers": cmd_barriers, "rates": cmd_rates,
            "compare": cmd_compare, "symmetry": cmd_symmetry, "sweep": cmd_sweep,
            "report": cmd_report}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment file")
    common.add_argument("--out", default=None, help="output directory (default: [output].dir)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mesh-level", type=int, default=None,
                        help="number of uniform refinements of the configured mesh")
    common.add_argument("--format", action="append", choices=("json", "csv", "svg"),
                        help="repeatable; default: [output].formats")
    ap = argparse.ArgumentParser(prog="singplap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "solve":
            sp.add_argument("--dim", type=int, choices=(1, 2), default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        session = Session(args)
        code = COMMANDS[args.command](session)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"failed at stage {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: {'ok' if code == EXIT_PASS else 'checks failed'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
