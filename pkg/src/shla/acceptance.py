"""The eleven acceptance checks, shared by `shla suite` and tests/test_acceptance.py.

Each check returns a CheckResult with the measured quantities; a check
passes only if every tolerance and its time budget are met.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebroid import LInftyContext, bracket, linfty_residual, m1, m_ell, m_general
from .chart import builtin_flat_torus, builtin_oscillator, exact_entry, omega_inverse_at, oscillator_H
from .deformation import (DeformationSeries, ObstructionReport, _fsharp_numeric, kuranishi, mc_solve,
                          twisted_m0)
from .expr import ZERO, num, parse, sym
from .foliation import (TransverseField, pi_bracket, pi_differential, splitting_transform,
                        transverse_curvature)
from .forms import LeafForm, d_F, one_form
from .oracle import (extend_prehamiltonian_flat, graph_coisotropy_defect, graph_defect_at,
                     grassmann_brute_force, grassmann_dimension, grassmann_is_coisotropic,
                     master_operator, random_grassmann_point, theta_pullback_check)
from .randgen import (random_flat_chart, random_form, random_torus_chart, random_transverse,
                      random_trig, rng_for)


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    elapsed: float
    budget: float
    values: dict = field(default_factory=dict)
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return f"[{status}] criterion {self.number:2d} {self.title}: {vals} ({self.elapsed:.2f}s / {self.budget:g}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _timed(number, title, budget, fn, seed):
    t0 = time.perf_counter()
    ok, values, note = fn(seed)
    el = time.perf_counter() - t0
    return CheckResult(number, title, bool(ok) and el < budget, el, budget, values, note)


def zambon_gamma1():
    return one_form(2, parse("sin(2*pi*y1)"), parse("sin(2*pi*y2)"))


def y1_family(rng, r=2):
    f = random_trig(["y1"], rng, degree=2)
    g = random_trig(["y1"], rng, degree=2)
    return one_form(r, f, g)


# ---------------------------------------------------------------- 1, 2, 3

def check_zambon_profile(seed):
    ft = builtin_flat_torus()
    kr = kuranishi(ft, zambon_gamma1())
    mesh, prof = kr.profile_on_grid(ft, 32)
    target = -4 * np.pi ** 2 * np.cos(2 * np.pi * mesh[0]) * np.cos(2 * np.pi * mesh[1])
    err = float(np.max(np.abs(prof - target)))
    return err < 1e-9, {"max_err": err}, ""


def check_obstruction(seed):
    ft = builtin_flat_torus()
    out = mc_solve(ft, zambon_gamma1(), 3)
    ok = isinstance(out, ObstructionReport) and out.order == 2 and out.norm > 1
    vals = {"result": type(out).__name__}
    if isinstance(out, ObstructionReport):
        vals.update(order=out.order, l2_norm=out.norm)
    return ok, vals, ""


def check_unobstructed(seed):
    ft = builtin_flat_torus()
    rng = rng_for(seed)
    pts = ft.sample(64, seed)
    worst_kr, worst_def, zero_orders = 0.0, 0.0, True
    for _ in range(3):
        g1 = y1_family(rng)
        kr = kuranishi(ft, g1, points=pts)
        worst_kr = max(worst_kr, kr.obstruction.max_abs(ft, pts))
        series = mc_solve(ft, g1, 4, points=pts)
        if not isinstance(series, DeformationSeries):
            return False, {"result": "obstructed"}, ""
        zero_orders &= all(g.is_zero for g in series.orders[1:])
        worst_def = max(worst_def, graph_coisotropy_defect(ft, g1.scale(num(Fraction(1, 10))), pts))
    ok = worst_kr < 1e-10 and zero_orders and worst_def < 1e-8
    return ok, {"max_Kr": worst_kr, "higher_orders_zero": zero_orders, "graph_defect": worst_def}, ""


# ---------------------------------------------------------------- 4, 5

def check_oscillator_flat(seed):
    alpha = Fraction(3, 2)
    ch = builtin_oscillator(alpha)
    pts = ch.sample(100, seed)
    Fmax = transverse_curvature(ch).max_abs(ch, pts)
    w12 = exact_entry(ch, ch.omega[0][1])
    exact = w12.op == "num" and w12.args[0] == 1 / (2 * (alpha - 1))
    lo, hi = Fraction(1, 4), (2 * alpha - 1) / (4 * alpha)
    H3 = pts["y2"]
    in_bound = bool(np.all((H3 >= float(lo)) & (H3 <= float(hi))))
    H1, H2 = oscillator_H(alpha)
    h1, h2 = ch.eval([H1, H2], pts)
    consistent = bool(np.all(h1 >= 0) and np.all(h2 >= 0)
                      and np.max(np.abs(h1 + h2 + H3 - 0.5)) < 1e-12
                      and np.max(np.abs(h1 + float(alpha) * h2 - 0.25)) < 1e-12)
    ok = Fmax < 1e-12 and exact and in_bound and consistent
    return ok, {"max_F": Fmax, "w12": str(w12), "H3_bounded": in_bound, "levels_consistent": consistent}, ""


def check_oscillator_bracket(seed):
    ch = builtin_oscillator(Fraction(3, 2))
    ctx = LInftyContext(ch)
    rng = rng_for(seed)
    pts = ch.sample(100, seed)
    worst = 0.0
    for _ in range(3):
        g = random_trig(["y1", "y2"], rng)
        h = random_trig(["y1", "y2"], rng)
        G = one_form(2, g, h)
        val = m_ell(ctx, [G, G]).evaluate(ch, pts)[:, 0]
        dg1, dg2, dh1, dh2 = ch.eval([g.diff("y1"), g.diff("y2"), h.diff("y1"), h.diff("y2")], pts)
        w12 = omega_inverse_at(ch, pts)[:, 0, 1]
        target = 2 * w12 * (dg1 * dh2 - dh1 * dg2)
        worst = max(worst, float(np.max(np.abs(val - target))))
    return worst < 1e-9, {"max_err": worst}, "w^12 is the (1,2) entry of the matrix inverse of omega"


# ---------------------------------------------------------------- 6

def check_bianchi(seed):
    worst = {"dF": 0.0, "d2B_deg0": 0.0, "d2B_deg1": 0.0, "transform": 0.0}
    for s in range(3):
        ch = random_torus_chart(2, 1 + s % 2, seed + s, nterms=1)
        rng = rng_for(seed + 100 + s)
        pts = ch.sample(100, seed + s)
        F = transverse_curvature(ch)
        worst["dF"] = max(worst["dF"], pi_differential(ch, F).max_abs(ch, pts))
        B0 = random_transverse(ch, 0, rng, nterms=1)
        d2 = pi_differential(ch, pi_differential(ch, B0))
        worst["d2B_deg0"] = max(worst["d2B_deg0"], (d2 - pi_bracket(ch, F, B0)).max_abs(ch, pts))
        B1 = random_transverse(ch, 1, rng, nterms=1)
        d2 = pi_differential(ch, pi_differential(ch, B1))
        worst["d2B_deg1"] = max(worst["d2B_deg1"], (d2 - pi_bracket(ch, F, B1, "shuffle")).max_abs(ch, pts))
        new = splitting_transform(ch, B1)
        law = F + pi_differential(ch, B1) + pi_bracket(ch, B1, B1)
        worst["transform"] = max(worst["transform"], (transverse_curvature(new) - law).max_abs(ch, pts))
    ok = all(v < 1e-8 for v in worst.values())
    return ok, worst, "brackets: wedge1 for [F,B0] and [B,B], shuffle for [F,B1]"


# ---------------------------------------------------------------- 7

def check_linfty(seed):
    rng = rng_for(seed)
    ch = random_torus_chart(1, 3, seed, nterms=1)
    ctx = LInftyContext(ch)
    pts = ch.sample(50, seed)
    worst = {1: 0.0, 2: 0.0, 3: 0.0}
    degree_sets = {1: [(0,), (1,), (2,)], 2: [(0, 1), (1, 1), (0, 2), (1, 2)], 3: [(1, 1, 1)]}
    for trial in range(10):
        for n, opts in degree_sets.items():
            degs = opts[trial % len(opts)]
            xs = [random_form(ch, d, rng, nterms=1) for d in degs]
            worst[n] = max(worst[n], linfty_residual(ctx, n, xs, points=pts))
    # flat splitting (F = 0, R != 0): m_l for l >= 3 evaluates to zero, Leibniz and Jacobi hold
    fl = random_flat_chart(1, 3, seed)
    fctx = LInftyContext(fl)
    fpts = fl.sample(50, seed)
    m3_flat, leib, jac = 0.0, 0.0, 0.0
    for trial in range(10):
        a, b, c = (random_form(fl, 1, rng, nterms=1) for _ in range(3))
        m3_flat = max(m3_flat, m_general(fctx, [a, b, c]).max_abs(fl, fpts))
        x0 = random_form(fl, trial % 2, rng, nterms=1)
        x1 = random_form(fl, 1, rng, nterms=1)
        p = x0.degree
        lhs = d_F(fl, bracket(fctx, x0, x1))
        rhs = d_F(fl, x0, strict=False)
        rhs = bracket(fctx, rhs, x1) + (bracket(fctx, x0, d_F(fl, x1)) if p % 2 == 0 else -bracket(fctx, x0, d_F(fl, x1)))
        leib = max(leib, (lhs - rhs).max_abs(fl, fpts))
        jac = max(jac, linfty_residual(fctx, 3, [a, b, c], points=fpts))
    vals = {"n1": worst[1], "n2": worst[2], "n3": worst[3], "flat_m3": m3_flat, "flat_leibniz": leib,
            "flat_jacobi": jac}
    ok = max(worst.values()) < 1e-8 and m3_flat < 1e-9 and leib < 1e-9 and jac < 1e-9
    return ok, vals, ""


# ---------------------------------------------------------------- 8

def pointwise_solution(chart, s: LeafForm, point):
    """Add c (q1 - q1(p0)) f*_2 to s so that the master operator vanishes at the single point p0 (r = 2)."""
    if chart.r != 2:
        raise ValueError("pointwise solutions are built for r = 2")
    q10 = float(np.atleast_1d(point[chart.q[0]])[0])
    bump = LeafForm.from_dict(1, 2, {(1,): sym(chart.q[0]) - num(q10)})
    m0 = master_operator(chart, s, point)[0, 0]
    m1_ = master_operator(chart, s + bump, point)[0, 0]
    # the operator is affine in c here: the bump vanishes at p0 and bump ^ bump = 0
    c = -m0 / (m1_ - m0)
    return s + bump.scale(num(float(c)))


def check_master_equivalence(seed):
    rng = np.random.default_rng(seed)
    charts = [random_torus_chart(1, 2, seed, nterms=1), random_torus_chart(2, 2, seed + 1, nterms=1),
              builtin_flat_torus()]
    agree, total, n_sol = 0, 0, 0
    tw_gap = 0.0
    mismatches = []
    for t in range(100):
        ch = charts[t % 3]
        p0 = ch.sample(1, seed + t)
        scale = float(rng.uniform(0.02, 0.2))
        s = random_form(ch, 1, rng_for(seed * 1000 + t), nterms=1).scale(num(scale))
        # keep the Neumann series of the twisted m_0 well inside its radius
        rho = float(np.max(np.abs(np.linalg.eigvals(_fsharp_numeric(ch, s, 1.0, p0)))))
        if rho > 0.5:
            s = s.scale(num(0.5 / rho))
        if ch is charts[2] and t % 2 == 0:
            s = y1_family(rng_for(seed * 1000 + t)).scale(num(scale))
        elif t % 2 == 0:
            s = pointwise_solution(ch, s, p0)
        M = master_operator(ch, s, p0)
        mres = float(np.max(np.abs(M)))
        gdef = float(np.max(graph_defect_at(ch, s, p0)))
        total += 1
        n_sol += mres < 1e-7
        if (mres < 1e-7) == (gdef < 1e-8):
            agree += 1
        else:
            mismatches.append((t, mres, gdef))
        tw = twisted_m0(ch, s, 1.0, p0)
        tw_gap = max(tw_gap, float(np.max(np.abs(tw + M))),
                     abs(float(np.max(np.abs(tw))) - mres))
    ok = agree == total and tw_gap < 1e-9 and 0 < n_sol < total
    return ok, {"agree": f"{agree}/{total}", "solutions": n_sol, "twisted_gap": tw_gap}, \
        (f"mismatches: {mismatches[:3]}" if mismatches else "")


# ---------------------------------------------------------------- 9

def _slope(eps, vals):
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


def check_linearization(seed):
    ch = random_torus_chart(1, 2, seed, nterms=1)
    rng = rng_for(seed)
    pts = ch.sample(30, seed)
    eps = np.array([1e-2, 1e-3, 1e-4])
    beta = LeafForm.scalar(random_trig(ch.coords, rng, nterms=2), 2)
    closed = d_F(ch, beta) + one_form(2, random_trig(ch.y, rng), random_trig(ch.y, rng))
    open_ = random_form(ch, 1, rng, nterms=2)
    def res(x):
        return [float(np.max(np.abs(master_operator(ch, x.scale(num(float(e))), pts)))) for e in eps]
    s_closed = _slope(eps, res(closed))
    s_open = _slope(eps, res(open_))
    ok = s_closed >= 1.9 and abs(s_open - 1) < 0.1
    return ok, {"slope_closed": s_closed, "slope_nonclosed": s_open}, ""


# ---------------------------------------------------------------- 10

def check_grassmann(seed):
    rng = np.random.default_rng(seed)
    disagree = 0
    for n, k in [(2, 1), (3, 1), (3, 2)]:
        for _ in range(1000):
            gp = random_grassmann_point(n, k, rng)
            if grassmann_is_coisotropic(gp)[0] != grassmann_brute_force(gp)[0]:
                disagree += 1
    dims = tuple(grassmann_dimension(n, k) for n, k in [(2, 1), (3, 1), (3, 2)])
    # k = 0: coisotropic = Lagrangian, A_I symmetric
    lag_ok = True
    for _ in range(200):
        gp = random_grassmann_point(3, 0, rng)
        sym_ = np.allclose(gp.A_I, gp.A_I.T, atol=1e-12)
        lag_ok &= grassmann_is_coisotropic(gp)[0] == sym_ == grassmann_brute_force(gp)[0]
    lag_ok &= grassmann_dimension(3, 0) == 6
    ok = disagree == 0 and dims == (3, 7, 5) and lag_ok
    return ok, {"disagreements": disagree, "dims": dims, "lagrangian_case": lag_ok}, ""


# ---------------------------------------------------------------- 11

def check_pullback(seed):
    worst_a, worst_b = 0.0, 0.0
    for s in range(3):
        ch = random_torus_chart(1, 2, seed + s, nterms=1)
        sec = random_form(ch, 1, rng_for(seed + 10 + s), nterms=2).scale(num(Fraction(1, 4)))
        a, b = theta_pullback_check(ch, sec, ch.sample(30, seed + s))
        worst_a, worst_b = max(worst_a, a), max(worst_b, b)
    ft = builtin_flat_torus()
    worst_x = 0.0
    for xi in ([parse("1"), ZERO, ZERO, ZERO],
               [parse("cos(2*pi*y2)"), ZERO, ZERO, ZERO],
               [parse("sin(2*pi*y2)"), parse("cos(2*pi*y1)"), parse("sin(2*pi*(q1 + y1))"), parse("cos(2*pi*q2)")]):
        _, d = extend_prehamiltonian_flat(ft, xi, ft.sample(30, seed))
        worst_x = max(worst_x, d)
    fl = random_flat_chart(1, 2, seed, curved_omega=False)
    _, d = extend_prehamiltonian_flat(fl, [parse("cos(2*pi*y2)"), ZERO, parse("sin(2*pi*q1)"), ZERO],
                                      fl.sample(30, seed))
    worst_x = max(worst_x, d)
    ok = worst_a < 1e-12 and worst_b < 1e-6 and worst_x < 1e-6
    return ok, {"identity_a": worst_a, "identity_b": worst_b, "prehamiltonian": worst_x}, ""


CHECKS = [
    (1, "Zambon obstruction profile", 1.0, check_zambon_profile),
    (2, "obstruction detection", 1.0, check_obstruction),
    (3, "unobstructed family + oracle", 5.0, check_unobstructed),
    (4, "oscillator flatness", 1.0, check_oscillator_flat),
    (5, "oscillator Kuranishi bracket", 1.0, check_oscillator_bracket),
    (6, "Bianchi identities", 10.0, check_bianchi),
    (7, "L-infinity relations", 30.0, check_linfty),
    (8, "master equation vs oracle", 30.0, check_master_equivalence),
    (9, "linearization slopes", 5.0, check_linearization),
    (10, "coisotropic Grassmannian", 10.0, check_grassmann),
    (11, "pullback identities", 5.0, check_pullback),
]


def run_check(number: int, seed: int = 7) -> CheckResult:
    for n, title, budget, fn in CHECKS:
        if n == number:
            return _timed(n, title, budget, fn, seed)
    raise KeyError(f"no criterion {number}")


def run_all(seed: int = 7, only=None):
    return [run_check(n, seed) for n, *_ in CHECKS if only is None or n in only]
