import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shla.acceptance import y1_family, zambon_gamma1
from shla.algebroid import LInftyContext, m2, m_ell
from shla.chart import builtin_flat_torus, builtin_oscillator
from shla.deformation import (DeformationSeries, DivergentSeries, NotClosed, ObstructionReport, kuranishi,
                              mc_residual, mc_solve, twisted_m0, twisted_m0_residual, twisted_terms)
from shla.expr import num, parse
from shla.forms import LeafForm, d_F, one_form
from shla.oracle import graph_coisotropy_defect, master_operator
from shla.randgen import random_form, random_torus_chart, rng_for
from shla.spectral import SpectralError

FT = builtin_flat_torus()
seeds = st.integers(0, 10_000)


def test_kuranishi_zambon_profile():
    kr = kuranishi(FT, zambon_gamma1(), N=4)
    mesh, prof = kr.profile_on_grid(FT, 16)
    want = -4 * np.pi ** 2 * np.cos(2 * np.pi * mesh[0]) * np.cos(2 * np.pi * mesh[1])
    assert np.max(np.abs(prof - want)) < 1e-9


def test_kuranishi_vanishing_cases():
    g = one_form(2, parse("sin(2*pi*y1)"), parse("cos(4*pi*y1) + 1/3"))
    assert kuranishi(FT, g).obstruction.is_zero
    assert kuranishi(FT, one_form(2, num(2), num(-1))).obstruction.is_zero


def test_kuranishi_rejects_open_form():
    with pytest.raises(NotClosed):
        kuranishi(FT, one_form(2, 0, parse("sin(2*pi*q1)")))


def test_kuranishi_non_torus_profile():
    osc = builtin_oscillator()
    kr = kuranishi(osc, one_form(2, parse("y2^2"), parse("sin(2*pi*y1)")))
    assert kr.profile is None and not kr.obstruction.is_zero
    with pytest.raises(SpectralError):
        kr.profile_on_grid(osc)


@given(seeds)
@settings(max_examples=5)
def test_kuranishi_gauge_independent(seed):
    rng = rng_for(seed)
    beta = random_form(FT, 0, rng, nterms=2)
    g1 = zambon_gamma1()
    kr0 = kuranishi(FT, g1, N=6)
    kr1 = kuranishi(FT, g1 + d_F(FT, beta), N=6)
    _, p0 = kr0.profile_on_grid(FT, 12)
    _, p1 = kr1.profile_on_grid(FT, 12)
    assert np.max(np.abs(p0 - p1)) < 1e-8


def test_kuranishi_gauge_independent_curved():
    ch = random_torus_chart(1, 2, 3, curved_omega=False, nterms=1)
    rng = rng_for(3)
    g1 = one_form(2, parse("sin(2*pi*y1)"), parse("cos(2*pi*y2)"))
    beta = random_form(ch, 0, rng, nterms=1)
    # on this chart g1 is closed since d_F only sees q
    p0 = kuranishi(ch, g1, N=8).profile
    p1 = kuranishi(ch, g1 + d_F(ch, beta), N=8).profile
    assert (p0 - p1).max_abs(ch, ch.sample(40)) < 1e-8


def test_mc_solve_zambon_obstructed():
    rep = mc_solve(FT, zambon_gamma1(), 3, N=4)
    assert isinstance(rep, ObstructionReport)
    assert rep.order == 2 and rep.norm > 1e-6
    pts = FT.sample(30)
    want = -4 * np.pi ** 2 * np.cos(2 * np.pi * pts["y1"]) * np.cos(2 * np.pi * pts["y2"])
    assert np.allclose(rep.representative.evaluate(FT, pts)[:, 0], want, atol=1e-9)
    # L2 norm of the profile: 4 pi^2 * 1/2
    assert rep.norm == pytest.approx(2 * np.pi ** 2, rel=1e-9)
    assert rep.to_json()["order"] == 2


def test_mc_solve_unobstructed_family():
    g1 = y1_family(rng_for(4))
    series = mc_solve(FT, g1, 4, N=4)
    assert isinstance(series, DeformationSeries) and series.K == 4
    assert all(g.is_zero for g in series.orders[1:])
    assert mc_residual(FT, series) < 1e-9
    assert graph_coisotropy_defect(FT, g1.scale(num(0.1))) < 1e-8


def test_mc_solve_zero():
    series = mc_solve(FT, LeafForm.zero(1, 2), 3, N=2)
    assert all(g.is_zero for g in series.orders)


def test_mc_solve_exact_start_on_curved_chart():
    ch = random_torus_chart(1, 2, 5, curved_omega=False, nterms=1)
    g1 = d_F(ch, LeafForm.scalar(parse("sin(2*pi*(q1+y1))/8"), 2))
    series = mc_solve(ch, g1, 3, N=12)
    assert isinstance(series, DeformationSeries)
    assert mc_residual(ch, series) < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_leaf_circle_never_obstructed(seed):
    ch = random_torus_chart(1, 1, seed, nterms=1)
    g1 = random_form(ch, 1, rng_for(seed), nterms=1)   # every 1-form is closed when r = 1
    series = mc_solve(ch, g1, 3, N=4)
    assert isinstance(series, DeformationSeries)


def test_mc_solve_errors():
    with pytest.raises(SpectralError):
        mc_solve(builtin_oscillator(), one_form(2, 1, 0), 2)
    with pytest.raises(ValueError):
        mc_solve(FT, zambon_gamma1(), 0)
    with pytest.raises(NotClosed):
        mc_solve(FT, one_form(2, parse("sin(2*pi*q2)"), 0), 2)
    with pytest.raises(ValueError):
        DeformationSeries(FT, [LeafForm.zero(2, 2)])


def test_mc_residual_examples():
    g1 = zambon_gamma1()
    pts = FT.sample(40)
    single = DeformationSeries(FT, [g1])
    half = m2(LInftyContext(FT), g1, g1).scale(num(0.5)).max_abs(FT, pts)
    assert mc_residual(FT, single, 2, points=pts) == pytest.approx(half)
    ok = mc_solve(FT, y1_family(rng_for(1)), 2, N=4)
    wrong = DeformationSeries(FT, [ok.orders[0], one_form(2, 0, parse("sin(2*pi*q1)"))])
    assert mc_residual(FT, ok, points=pts) < 1e-9
    assert mc_residual(FT, wrong, points=pts) > 1


def test_twisted_terms_match_m_ell():
    ch = random_torus_chart(1, 2, 6, nterms=1)
    g = random_form(ch, 1, rng_for(6), nterms=1).scale(num(0.05))
    pts = ch.sample(20)
    terms = twisted_terms(ch, g, 1.0, pts)
    ctx = LInftyContext(ch)
    for l in (2, 3, 4):
        want = m_ell(ctx, [g] * l).evaluate(ch, pts) / math.factorial(l)
        assert np.allclose(terms[l - 1], want, atol=1e-13)


def test_twisted_flat_truncates():
    terms = twisted_terms(FT, zambon_gamma1(), 0.1, FT.sample(10))
    assert len(terms) == 2
    assert twisted_m0_residual(FT, y1_family(rng_for(2)), 0.3) < 1e-10


@pytest.mark.parametrize("seed", [0, 1])
def test_twisted_equals_master_operator(seed):
    ch = random_torus_chart(1, 2, seed, nterms=1)
    g = random_form(ch, 1, rng_for(seed), nterms=1)
    pts = ch.sample(20, seed)
    eps = 0.03
    tw = twisted_m0(ch, g, eps, pts)
    M = master_operator(ch, g.scale(num(eps)), pts)
    assert np.max(np.abs(tw + M)) < 1e-9


def test_twisted_divergence():
    ch = random_torus_chart(1, 2, 0, nterms=1)
    g = random_form(ch, 1, rng_for(0), nterms=1)
    with pytest.raises(DivergentSeries):
        twisted_m0(ch, g, 1e3, ch.sample(20))
