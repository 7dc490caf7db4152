"""Kuranishi map, order-by-order Maurer-Cartan solver and obstruction reports.

Gamma = sum_k eps^k Gamma_k with every Gamma_k a leafwise one-form. The
Maurer-Cartan operator is MC(Gamma) = sum_l 1/l! m_l(Gamma, ..., Gamma); at
order k it reads  -d_F Gamma_k + RHS_k = 0  with RHS_k built from lower orders.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebroid import LInftyContext, m1, m_ell
from .chart import ChartSpec
from .expr import num
from .forms import LeafForm, d_F, fsharp_contract, nabla
from .spectral import (DEFAULT_N, SpectralError, fiber_integral, q_zero_mode, solve_dF,
                       to_leafform, to_spectral)

CLOSED_TOL = 1e-10
SOLVER_TOL = 1e-9


class NotClosed(ValueError):
    pass


class DivergentSeries(ArithmeticError):
    pass


@dataclass
class DeformationSeries:
    chart: ChartSpec
    orders: list          # Gamma_1, ..., Gamma_K

    def __post_init__(self):
        for g in self.orders:
            if g.degree != 1:
                raise ValueError("every order of a deformation series is a one-form")

    @property
    def K(self):
        return len(self.orders)

    def to_json(self):
        return {"chart": self.chart.name, "chart_hash": self.chart.chart_hash(),
                "orders": [g.to_json() for g in self.orders]}


@dataclass
class ObstructionReport:
    order: int
    representative: LeafForm      # q-zero-mode part of the order-k right-hand side
    profile: LeafForm             # same thing, y-only coefficients
    norm: float                   # L2 norm over the y-torus

    def to_json(self):
        return {"obstructed": True, "order": self.order, "norm": self.norm,
                "representative": self.representative.to_json()}


@dataclass
class KuranishiResult:
    m2: LeafForm                  # m_2(Gamma_1, Gamma_1)
    obstruction: LeafForm         # 1/2 m_2(Gamma_1, Gamma_1)
    profile: LeafForm | None      # q-zero-mode of the obstruction (torus charts only)

    def profile_on_grid(self, chart: ChartSpec, n: int = 32):
        """Profile values of the top component on an n x ... x n y-grid (periods scaled)."""
        if self.profile is None:
            raise SpectralError("class profile needs a torus chart")
        axes = [np.arange(n) / n * chart.period(c) for c in chart.y]
        mesh = np.meshgrid(*axes, indexing="ij")
        pt = {c: m.ravel() for c, m in zip(chart.y, mesh)}
        for c in chart.q:
            pt[c] = np.zeros(mesh[0].size)
        top = tuple(range(chart.r))
        vals = chart.eval([self.profile[top]], pt)[0]
        return mesh, np.broadcast_to(np.asarray(vals, float), mesh[0].size).reshape(mesh[0].shape)


def _require_closed(chart, g, points, what="Gamma_1"):
    if g.degree >= chart.r:
        return
    res = d_F(chart, g).max_abs(chart, points)
    if res > CLOSED_TOL:
        raise NotClosed(f"{what} is not d_F-closed (residual {res:.3e})")


def _l2_norm(chart, form: LeafForm, n=32):
    axes = [np.arange(n) / n * chart.period(c) for c in chart.y]
    mesh = np.meshgrid(*axes, indexing="ij")
    pt = {c: m.ravel() for c, m in zip(chart.y, mesh)}
    for c in chart.q:
        pt[c] = np.zeros(mesh[0].size)
    vals = form.evaluate(chart, pt)
    vol = float(np.prod([chart.period(c) for c in chart.y]))
    return float(np.sqrt(np.mean(np.sum(vals ** 2, axis=-1)) * vol))


def zero_mode_form(chart, eta: LeafForm, N: int = DEFAULT_N) -> LeafForm:
    """Leaf-fiber average of eta as a LeafForm with y-only coefficients."""
    return to_leafform(q_zero_mode(chart, to_spectral(chart, eta, N)))


def kuranishi(chart: ChartSpec, gamma1: LeafForm, N: int = DEFAULT_N, ctx: LInftyContext | None = None,
              points=None) -> KuranishiResult:
    ctx = ctx or LInftyContext(chart)
    points = chart.sample() if points is None else points
    _require_closed(chart, gamma1, points)
    m2v = m_ell(ctx, [gamma1, gamma1])
    obs = m2v.scale(num(Fraction(1, 2)))
    profile = None
    if chart.is_torus:
        profile = LeafForm.zero(2, chart.r) if obs.is_zero else zero_mode_form(chart, obs, N)
    return KuranishiResult(m2v, obs, profile)


# ---------------------------------------------------------------- MC expansion

def _compositions(k, l):
    """Multisets of l positive orders summing to k, with their multinomial multiplicity."""
    out = []
    def rec(rem, parts, lo):
        if len(parts) == l:
            if rem == 0:
                c = Counter(parts)
                mult = math.factorial(l)
                for v in c.values():
                    mult //= math.factorial(v)
                out.append((tuple(parts), mult))
            return
        for v in range(lo, rem + 1):
            rec(rem - v, parts + [v], v)
    rec(k, [], 1)
    return out


def mc_rhs(ctx: LInftyContext, orders, k: int) -> LeafForm:
    """sum_{l >= 2} 1/l! sum_{k_1 + ... + k_l = k} m_l(Gamma_k1, ..., Gamma_kl)."""
    r = ctx.chart.r
    acc = LeafForm.zero(2, r)
    for l in range(2, k + 1):
        if l >= 3 and ctx.flat:
            break
        for parts, mult in _compositions(k, l):
            if any(p > len(orders) for p in parts):
                continue
            args = [orders[p - 1] for p in parts]
            if any(a.is_zero for a in args):
                continue
            term = m_ell(ctx, args)
            if not term.is_zero:
                acc = acc + term.scale(num(Fraction(mult, math.factorial(l))))
    return acc


def mc_order(ctx: LInftyContext, orders, k: int) -> LeafForm:
    """Full order-k part of MC, including m_1(Gamma_k) when Gamma_k is present."""
    out = mc_rhs(ctx, orders, k)
    if k <= len(orders):
        out = out + m1(ctx, orders[k - 1], strict=False)
    return out


def mc_residual(chart: ChartSpec, series: DeformationSeries, K: int | None = None, points=None,
                ctx: LInftyContext | None = None) -> float:
    ctx = ctx or LInftyContext(chart)
    K = series.K if K is None else K
    points = chart.sample() if points is None else points
    worst = 0.0
    for k in range(1, K + 1):
        worst = max(worst, mc_order(ctx, series.orders, k).max_abs(chart, points))
    return worst


def mc_solve(chart: ChartSpec, gamma1: LeafForm, K: int, N: int = DEFAULT_N, tol: float = SOLVER_TOL,
             points=None):
    """Solve MC order by order up to K. Returns a DeformationSeries or an ObstructionReport."""
    if not chart.is_torus:
        raise SpectralError("mc_solve needs a torus chart (global inverse of d_F)")
    if K < 1:
        raise ValueError("order must be >= 1")
    ctx = LInftyContext(chart, max_arity=max(2, K))
    points = chart.sample() if points is None else points
    _require_closed(chart, gamma1, points)
    orders = [gamma1]
    for k in range(2, K + 1):
        rhs = mc_rhs(ctx, orders, k)
        if rhs.is_zero:
            orders.append(LeafForm.zero(1, chart.r))
            continue
        if chart.r > 2:
            res = d_F(chart, rhs).max_abs(chart, points)
            if res > tol:
                raise NotClosed(f"order-{k} right-hand side is not closed (residual {res:.3e}); "
                                "this indicates a sign or normalization bug in the structure maps, not bad input")
        # d_F Gamma_k = rhs, i.e. solve d_F Gamma = -eta with eta = -rhs
        spec = to_spectral(chart, rhs, N)
        gamma, obstruction = solve_dF(chart, spec.scale(-1.0), tol=tol)
        if obstruction is not None:
            rep = to_leafform(obstruction.scale(-1.0))
            return ObstructionReport(k, rep, rep, _l2_norm(chart, rep))
        orders.append(to_leafform(gamma))
    series = DeformationSeries(chart, orders)
    res = mc_residual(chart, series, K, points, ctx)
    if res > tol:
        raise ArithmeticError(f"solved series fails its own residual check ({res:.3e}); raise the truncation N")
    return series


# ---------------------------------------------------------------- twisted m_0

def twisted_terms(chart: ChartSpec, gamma: LeafForm, eps: float, points, max_terms: int = 200,
                  tail_tol: float = 1e-13, F=None):
    """Numeric terms 1/l! m_l(eps Gamma, ..., eps Gamma), l = 1, 2, ..., as arrays (npts, C(r,2)).

    For identical one-form inputs 1/l! m_l = (-1)^l / 2 * T(Gamma, ..., Gamma); the
    chain w^-1 (F# Gamma)^(l-2) is accumulated numerically at the points.
    """
    from .foliation import transverse_curvature
    F = F if F is not None else transverse_curvature(chart)
    n, r = chart.twok, chart.r
    pairs = list(itertools.combinations(range(r), 2))
    g = gamma.scale(num(float(eps)))
    nab = np.stack([nabla(chart, g, i).evaluate(chart, points) for i in range(n)], axis=1)  # (P, n, r)
    winv = np.linalg.inv(chart.omega_at(points))                                             # (P, n, n)
    M = fsharp_contract(chart, F, g).evaluate(chart, points)[..., 0]                         # (P, n, n)

    def wedge_pairs(A, C, B):
        # sum_ij A_i ^ C_ij B_j for one-forms A_i, B_j; component (a<b) is A_a B_b - A_b B_a
        cols = [np.einsum("pi,pij,pj->p", A[:, :, a], C, B[:, :, b])
                - np.einsum("pi,pij,pj->p", A[:, :, b], C, B[:, :, a]) for a, b in pairs]
        return np.stack(cols, axis=-1) if cols else np.zeros(A.shape[:1] + (0,))

    terms = [-(d_F(chart, g, strict=False).evaluate(chart, points))]
    Cmat = winv
    l = 2
    while True:
        T = wedge_pairs(nab, Cmat, nab)
        t = 0.5 * (-1) ** l * T
        terms.append(t)
        if np.max(np.abs(t), initial=0.0) < tail_tol and l > 2:
            break
        if l >= max_terms:
            raise DivergentSeries("twisted m_0 series did not converge (is |F# eps Gamma| < 1 ?)")
        Cmat = np.einsum("pij,pjk->pik", Cmat, M)
        if not np.any(Cmat):
            break
        l += 1
    return terms


def twisted_m0(chart: ChartSpec, gamma: LeafForm, eps: float, points=None, **kw) -> np.ndarray:
    points = chart.sample() if points is None else points
    rho = np.max(np.abs(np.linalg.eigvals(_fsharp_numeric(chart, gamma, eps, points))), initial=0.0)
    if rho >= 1:
        raise DivergentSeries(f"spectral radius of F# eps Gamma is {rho:.3f} >= 1")
    return sum(twisted_terms(chart, gamma, eps, points, **kw))


def _fsharp_numeric(chart, gamma, eps, points):
    from .foliation import transverse_curvature
    M = fsharp_contract(chart, transverse_curvature(chart), gamma).evaluate(chart, points)[..., 0]
    return eps * M


def twisted_m0_residual(chart: ChartSpec, gamma: LeafForm, eps: float, points=None, **kw) -> float:
    return float(np.max(np.abs(twisted_m0(chart, gamma, eps, points, **kw)), initial=0.0))
