"""Command line entry point: `shla <subcommand> ...`.

Every command that writes files also writes a run manifest next to the
first output (`<file>.manifest.json`). Result files themselves never contain
timings, so repeated runs with the same inputs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .chart import ChartError, ChartSpec, builtin_flat_torus, builtin_oscillator, load_chart, validate

DEFAULT_SEED = 7


def default_seed() -> int:
    v = os.environ.get("SHLA_SEED")
    return int(v) if v not in (None, "") else DEFAULT_SEED


@dataclass
class RunManifest:
    command: str
    chart_hash: str | None
    seed: int
    tolerances: dict = field(default_factory=dict)
    truncation: int | None = None
    tool_version: str = __version__
    wall_time: float = 0.0

    def write(self, target: Path):
        path = Path(str(target) + ".manifest.json")
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


# ---------------------------------------------------------------- io helpers

def resolve_chart(ref: str) -> ChartSpec:
    """A chart file, or builtin:flat_torus / builtin:oscillator[:alpha]."""
    if ref.startswith("builtin:"):
        name, _, arg = ref[len("builtin:"):].partition(":")
        if name == "flat_torus":
            return builtin_flat_torus()
        if name == "oscillator":
            return validate(builtin_oscillator(Fraction(arg) if arg else Fraction(3, 2)))
        raise ChartError(f"unknown builtin chart {name!r} (known: flat_torus, oscillator)")
    return load_chart(ref)


def read_form(path: str, chart: ChartSpec):
    from .forms import LeafForm
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"form file not found: {p}")
    doc = json.loads(p.read_text())
    _validate_doc(doc, "form")
    return LeafForm.from_json(doc, chart.r)


def _schema_dir():
    here = Path(__file__).resolve()
    for base in (here.parents[2] / "schemas", here.parent / "schemas"):
        if base.is_dir():
            return base
    return None


def _validate_doc(doc, name):
    base = _schema_dir()
    if base is None or not (base / f"{name}.schema.json").exists():
        return
    import jsonschema
    jsonschema.validate(doc, json.loads((base / f"{name}.schema.json").read_text()))


def dump_json(doc, out: Path | None, schema: str | None = None):
    if schema:
        _validate_doc(doc, schema)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
    return text


def dump_csv(header, rows, out: Path | None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        out.write_text(buf.getvalue())


def _gnuplot(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        last = None
        for row in rows:
            if last is not None and row[0] != last:
                fh.write("\n")
            last = row[0]
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def _finish(args, out, chart, t0, tolerances=None, truncation=None):
    if out is None:
        return
    RunManifest(args.command, chart.chart_hash() if chart is not None else None, args.seed,
                tolerances or {}, truncation, __version__, round(time.perf_counter() - t0, 6)).write(out)


def _out(args):
    return Path(args.out) if getattr(args, "out", None) else None


# ---------------------------------------------------------------- commands

def cmd_chart(args):
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    doc = {"valid": True, "name": chart.name, "k": chart.k, "r": chart.r,
           "chart_hash": chart.chart_hash(), "torus": chart.is_torus}
    out = _out(args)
    dump_json(doc, out, "report")
    _finish(args, out, chart, t0)
    return 0


def _parse_at(text: str, chart: ChartSpec) -> dict:
    pt = {}
    for part in text.split(","):
        name, sep, val = part.partition("=")
        if not sep or name.strip() not in chart.coords:
            raise ValueError(f"bad --at entry {part!r}; expected name=value with name in {list(chart.coords)}")
        pt[name.strip()] = np.array([float(val)])
    missing = [c for c in chart.coords if c not in pt]
    if missing:
        raise ValueError(f"--at is missing coordinates {missing}")
    return pt


def _curvature_suite(chart: ChartSpec, which: str, seed: int) -> dict:
    from .foliation import (pi_bracket, pi_differential, splitting_transform, transverse_curvature)
    from .randgen import random_transverse, rng_for
    rng = rng_for(seed)
    pts = chart.sample(100, seed)
    F = transverse_curvature(chart)
    out = {}
    if which == "bianchi":
        out["dF"] = pi_differential(chart, F, strict=False).max_abs(chart, pts)
        B0 = random_transverse(chart, 0, rng, nterms=1)
        d2 = pi_differential(chart, pi_differential(chart, B0), strict=False)
        out["d2B"] = (d2 - pi_bracket(chart, F, B0)).max_abs(chart, pts) if chart.twok >= 2 else 0.0
    else:
        B = random_transverse(chart, 1, rng, nterms=1)
        law = F + pi_differential(chart, B) + pi_bracket(chart, B, B)
        out["transform"] = (transverse_curvature(splitting_transform(chart, B)) - law).max_abs(chart, pts)
    return out


def cmd_curvature(args):
    from .foliation import mean_curvature_at, transverse_curvature
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    out = _out(args)
    if args.check:
        res = _curvature_suite(chart, args.check, args.seed)
        ok = all(v < args.tol for v in res.values())
        doc = {"check": f"curvature-{args.check}", "residuals": res, "tolerance": args.tol, "passed": ok}
        dump_json(doc, out, "report")
        _finish(args, out, chart, t0, {args.check: args.tol})
        return 0 if ok else 1
    pts = _parse_at(args.at, chart) if args.at else chart.sample(args.points, args.seed)
    npts = len(pts[chart.coords[0]])
    F = transverse_curvature(chart)
    vals = F.evaluate(chart, pts)
    vals = np.broadcast_to(vals, (npts,) + vals.shape[1:])
    rho = mean_curvature_at(chart, pts)
    header = list(chart.coords) + [f"F{i + 1}{j + 1}_{a + 1}" for (i, j) in F.indices() for a in range(chart.r)] \
        + [f"rho_{a + 1}" for a in range(chart.r)]
    rows = []
    for p in range(npts):
        rows.append([float(pts[c][p]) for c in chart.coords] + [float(v) for v in vals[p].ravel()]
                    + [float(v) for v in rho[p]])
    dump_csv(header, rows, out)
    print(f"max |F| = {np.max(np.abs(vals)) if vals.size else 0.0:.3e}", file=sys.stderr)
    _finish(args, out, chart, t0)
    return 0


def cmd_df(args):
    from .forms import d_F
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    xi = read_form(args.form, chart)
    out = _out(args)
    dump_json(d_F(chart, xi).to_json(), out, "form")
    _finish(args, out, chart, t0)
    return 0


def cmd_linfty(args):
    from .algebroid import LInftyContext, linfty_residual
    from .randgen import random_form, rng_for
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    ctx = LInftyContext(chart, max_arity=max(2, args.arity), higher_sign=args.higher_sign)
    rng = rng_for(args.seed)
    pts = chart.sample(50, args.seed)
    worst = 0.0
    for _ in range(args.trials):
        xs = [random_form(chart, 1, rng, nterms=1) for _ in range(args.arity)]
        worst = max(worst, linfty_residual(ctx, args.arity, xs, points=pts))
    ok = worst < args.tol
    doc = {"check": "linfty", "arity": args.arity, "higher_sign": args.higher_sign, "trials": args.trials, "max_residual": worst,
           "tolerance": args.tol, "passed": ok}
    out = _out(args)
    dump_json(doc, out, "report")
    _finish(args, out, chart, t0, {"linfty": args.tol})
    return 0 if ok else 1


def cmd_kuranishi(args):
    from .deformation import kuranishi
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    g1 = read_form(args.gamma1, chart)
    kr = kuranishi(chart, g1, N=args.trunc)
    mesh, prof = kr.profile_on_grid(chart, args.grid)
    header = [f"{c}" for c in chart.y] + ["profile"]
    flat = [m.ravel() for m in mesh]
    rows = [[float(f[i]) for f in flat] + [float(prof.ravel()[i])] for i in range(prof.size)]
    out = _out(args)
    dump_csv(header, rows, out)
    if args.emit_gnuplot and out is not None:
        _gnuplot(Path(str(out) + ".dat"), header, rows)
    _finish(args, out, chart, t0, {"closed": 1e-10}, args.trunc)
    return 0


def cmd_mc_solve(args):
    from .deformation import ObstructionReport, mc_solve
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    g1 = read_form(args.gamma1, chart)
    res = mc_solve(chart, g1, args.order, N=args.trunc, tol=args.tol)
    out = _out(args)
    if isinstance(res, ObstructionReport):
        dump_json(res.to_json(), out, "obstruction")
        code = 2
    else:
        doc = res.to_json()
        doc["obstructed"] = False
        dump_json(doc, out, "series")
        code = 0
    _finish(args, out, chart, t0, {"solver": args.tol}, args.trunc)
    return code


def cmd_verify_graph(args):
    from .expr import num
    from .oracle import graph_coisotropy_defect, master_residual
    t0 = time.perf_counter()
    chart = resolve_chart(args.chart)
    s = read_form(args.section, chart).scale(num(args.scale))
    pts = chart.sample(args.points, args.seed)
    defect = graph_coisotropy_defect(chart, s, pts)
    mres = master_residual(chart, s, pts)
    doc = {"check": "verify-graph", "scale": args.scale, "graph_defect": defect, "master_residual": mres,
           "coisotropic": defect < args.tol, "tolerance": args.tol, "passed": defect < args.tol}
    out = _out(args)
    dump_json(doc, out, "report")
    _finish(args, out, chart, t0, {"defect": args.tol})
    return 0


def cmd_grassmann(args):
    from .oracle import (grassmann_brute_force, grassmann_dimension, grassmann_is_coisotropic,
                         random_grassmann_point)
    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    disagree = 0
    for _ in range(args.samples):
        gp = random_grassmann_point(args.n, args.k, rng)
        disagree += grassmann_is_coisotropic(gp)[0] != grassmann_brute_force(gp)[0]
    doc = {"check": "grassmann", "n": args.n, "k": args.k, "samples": args.samples,
           "disagreements": int(disagree), "dimension": grassmann_dimension(args.n, args.k),
           "passed": disagree == 0}
    out = _out(args)
    dump_json(doc, out, "report")
    _finish(args, out, None, t0)
    return 0 if disagree == 0 else 1


def cmd_reproduce(args):
    from .reproduce import reproduce_oscillator, reproduce_zambon
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fn = {"zambon": reproduce_zambon, "oscillator": reproduce_oscillator}[args.name]
    lines, ok = fn(outdir, args.seed)
    for line in lines:
        print(line)
    return 0 if ok else 1


def cmd_suite(args):
    from .acceptance import run_all
    only = None if not args.only else {int(v) for v in args.only.split(",")}
    results = run_all(args.seed, only)
    for r in results:
        print(r.line())
        if r.note and not r.passed:
            print("         " + r.note)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 1


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="shla", description="Strong homotopy Lie algebroids on foliation charts")
    p.add_argument("--version", action="version", version=f"shla {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $SHLA_SEED or 7)")
    common.add_argument("--threads", type=int, default=1, help="accepted for compatibility; execution is serial")
    common.add_argument("--out", help="write the result to this file (plus a .manifest.json)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("chart", parents=[common], help="chart utilities")
    csub = c.add_subparsers(dest="action", required=True)
    v = csub.add_parser("validate", parents=[common])
    v.add_argument("chart")
    v.set_defaults(func=cmd_chart)

    c = sub.add_parser("curvature", parents=[common], help="transverse curvature and mean curvature at sample points")
    c.add_argument("chart")
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--at", help="single point, e.g. y1=0.1,y2=0.2,q1=0,q2=0")
    c.add_argument("--check", choices=["bianchi", "transform"], help="run a residual suite instead")
    c.add_argument("--tol", type=float, default=1e-8)
    c.set_defaults(func=cmd_curvature)

    c = sub.add_parser("df", parents=[common], help="leafwise differential of a form")
    c.add_argument("chart")
    c.add_argument("form")
    c.set_defaults(func=cmd_df)

    c = sub.add_parser("linfty-check", parents=[common], help="L-infinity relations on random one-forms")
    c.add_argument("chart")
    c.add_argument("--arity", type=int, default=3)
    c.add_argument("--trials", type=int, default=10)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--higher-sign", type=int, choices=[1, -1], default=1,
                   help="overall sign of m_l for l >= 3; -1 is a deliberate mutation for sanity checks")
    c.set_defaults(func=cmd_linfty)

    c = sub.add_parser("kuranishi", parents=[common], help="class profile of the primary obstruction (CSV)")
    c.add_argument("chart")
    c.add_argument("--gamma1", required=True)
    c.add_argument("--trunc", type=int, default=16)
    c.add_argument("--grid", type=int, default=32)
    c.add_argument("--emit-gnuplot", action="store_true")
    c.set_defaults(func=cmd_kuranishi)

    c = sub.add_parser("mc-solve", parents=[common], help="order-by-order Maurer-Cartan solver")
    c.add_argument("chart")
    c.add_argument("--gamma1", required=True)
    c.add_argument("--order", type=int, default=3)
    c.add_argument("--trunc", type=int, default=16)
    c.add_argument("--tol", type=float, default=1e-9)
    c.set_defaults(func=cmd_mc_solve)

    c = sub.add_parser("verify-graph", parents=[common], help="coisotropy defect of the graph of a section")
    c.add_argument("chart")
    c.add_argument("--section", required=True)
    c.add_argument("--scale", type=float, default=1.0)
    c.add_argument("--points", type=int, default=64)
    c.add_argument("--tol", type=float, default=1e-8)
    c.set_defaults(func=cmd_verify_graph)

    c = sub.add_parser("grassmann", parents=[common], help="coisotropic Grassmannian checks")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--samples", type=int, default=1000)
    c.set_defaults(func=cmd_grassmann)

    c = sub.add_parser("reproduce", parents=[common], help="rerun a worked example")
    c.add_argument("name", choices=["zambon", "oscillator"])
    c.add_argument("--outdir", default="results")
    c.set_defaults(func=cmd_reproduce)

    c = sub.add_parser("suite", parents=[common], help="run all acceptance criteria")
    c.add_argument("--only", help="comma-separated criterion numbers")
    c.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"shla: I/O error: {exc}", file=sys.stderr)
        return 3
    except (ChartError, ValueError, ArithmeticError) as exc:
        print(f"shla: error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
