import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shla.algebroid import (LInftyContext, UnsupportedInput, bracket, koszul_sign, linfty_residual, m1, m2,
                            m_ell, m_general, slot_sign)
from shla.chart import builtin_flat_torus, builtin_oscillator
from shla.expr import num, parse
from shla.foliation import curvature_dual
from shla.forms import LeafForm, d_F, one_form
from shla.randgen import random_flat_chart, random_form, random_torus_chart, rng_for

seeds = st.integers(0, 10_000)
FT = builtin_flat_torus()


@pytest.fixture(scope="module")
def curved():
    ch = random_torus_chart(1, 3, 11, nterms=1)
    return ch, LInftyContext(ch), ch.sample(50, 11)


def test_m1_sign_and_square():
    ch = random_torus_chart(1, 3, 2, nterms=1)
    ctx = LInftyContext(ch)
    xi = random_form(ch, 1, rng_for(2))
    pts = ch.sample(20)
    assert (m1(ctx, xi) + d_F(ch, xi)).max_abs(ch, pts) == 0
    x0 = random_form(ch, 0, rng_for(3))
    assert (m1(ctx, x0) - d_F(ch, x0)).max_abs(ch, pts) == 0
    assert m1(ctx, m1(ctx, x0)).max_abs(ch, ch.sample(20)) < 1e-10


def test_m1_flat_example():
    g = one_form(2, parse("sin(2*pi*y1)"), parse("sin(2*pi*y2)"))
    assert m1(LInftyContext(FT), g).is_zero


def test_m2_flat_torus_poisson():
    a1, a2 = parse("sin(2*pi*y1)*cos(2*pi*y2)"), parse("cos(4*pi*y1) + y2*0")
    g = one_form(2, a1, a2)
    got = m2(LInftyContext(FT), g, g)
    pts = FT.sample(30)
    d = lambda e, x: FT.eval([e.diff(x)], pts)[0]
    pb = d(a1, "y2") * d(a2, "y1") - d(a2, "y2") * d(a1, "y1")
    assert np.allclose(got.evaluate(FT, pts)[:, 0], 2 * pb, atol=1e-12)


def test_m2_constants_vanish():
    ctx = LInftyContext(FT)
    c = one_form(2, num(3), num(-1))
    assert m2(ctx, c, c).is_zero
    xi = one_form(2, parse("sin(2*pi*y1)"), 0)
    assert m2(ctx, xi, c).is_zero


def test_m2_oscillator():
    osc = builtin_oscillator(Fraction(3, 2))
    ctx = LInftyContext(osc)
    g, h = parse("sin(2*pi*y1)*y2"), parse("y2^2 + cos(2*pi*y1)")
    gam = one_form(2, g, h)
    pts = osc.sample(40)
    d = lambda e, x: osc.eval([e.diff(x)], pts)[0]
    w12 = -2 * (1.5 - 1)        # (1,2) entry of the matrix inverse of omega
    want = 2 * w12 * (d(g, "y1") * d(h, "y2") - d(h, "y1") * d(g, "y2"))
    assert np.allclose(m2(ctx, gam, gam).evaluate(osc, pts)[:, 0], want, atol=1e-12)


@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_m2_graded_symmetry(seed, p, q):
    ch = random_torus_chart(1, 3, seed % 50, nterms=1)
    ctx = LInftyContext(ch)
    rng = rng_for(seed)
    a, b = random_form(ch, p, rng, nterms=1), random_form(ch, q, rng, nterms=1)
    s = koszul_sign((1, 0), [p - 1, q - 1])
    pts = ch.sample(20, seed)
    assert (m2(ctx, a, b) - m2(ctx, b, a).scale(s)).max_abs(ch, pts) < 1e-12


@given(seeds, st.integers(0, 2), st.integers(0, 1))
@settings(max_examples=6)
def test_m2_equals_permutation_formula(seed, p, q):
    ch = random_torus_chart(1, 3, seed % 50, nterms=1)
    ctx = LInftyContext(ch)
    rng = rng_for(seed)
    a, b = random_form(ch, p, rng, nterms=1), random_form(ch, q, rng, nterms=1)
    assert (m2(ctx, a, b) - m_general(ctx, [a, b])).max_abs(ch, ch.sample(20, seed)) < 1e-12


def _numeric_nabla(ch, xi, pts, h=1e-5):
    """(P, 2k, r) array of Y_i(xi_a) + xi_b dR_i^b/dq^a via finite differences."""
    P = len(pts[ch.y[0]])
    xv = xi.evaluate(ch, pts)
    R = ch.R_at(pts)

    def deriv(fn, c):
        hi, lo = dict(pts), dict(pts)
        hi[c] = pts[c] + h
        lo[c] = pts[c] - h
        return (fn(hi) - fn(lo)) / (2 * h)

    dxi = {c: deriv(lambda p: xi.evaluate(ch, p), c) for c in ch.coords}
    dR = {c: deriv(lambda p: ch.R_at(p), c) for c in ch.q}
    out = np.zeros((P, ch.twok, ch.r))
    for i in range(ch.twok):
        for a in range(ch.r):
            v = dxi[ch.y[i]][:, a].copy()
            for g in range(ch.r):
                v += R[:, i, g] * dxi[ch.q[g]][:, a] + xv[:, g] * dR[ch.q[a]][:, i, g]
            out[:, i, a] = v
    return out


def brute_m3(ch, forms, pts):
    """m_3 on three one-forms by explicit index loops; all Koszul signs are +1 here."""
    P, n, r = len(pts[ch.y[0]]), ch.twok, ch.r
    Fpair = curvature_dual(ch, pts)
    F = np.zeros((P, n, n, r))
    for p, (i, j) in enumerate(itertools.combinations(range(n), 2)):
        F[:, i, j], F[:, j, i] = Fpair[:, p], -Fpair[:, p]
    winv = np.linalg.inv(ch.omega_at(pts))
    nab = [_numeric_nabla(ch, f, pts) for f in forms]
    vals = [f.evaluate(ch, pts) for f in forms]
    pairs = list(itertools.combinations(range(r), 2))
    out = np.zeros((P, len(pairs)))
    for perm in itertools.permutations(range(3)):
        e1, e2, e3 = perm
        for p in range(P):
            Fe = np.einsum("ija,a->ij", F[p], vals[e2][p])
            A = winv[p] @ Fe @ winv[p]
            for c, (a, b) in enumerate(pairs):
                t = 0.0
                for i in range(n):
                    for j in range(n):
                        t += A[i, j] * (nab[e1][p, i, a] * nab[e3][p, j, b] - nab[e1][p, i, b] * nab[e3][p, j, a])
                out[p, c] += t
    return -0.5 * out


def test_m3_brute_force(curved):
    ch, ctx, _ = curved
    rng = rng_for(5)
    forms = [random_form(ch, 1, rng, nterms=1) for _ in range(3)]
    pts = ch.sample(20, 5)
    got = m_ell(ctx, forms).evaluate(ch, pts)
    want = brute_m3(ch, forms, pts)
    assert np.max(np.abs(got - want)) < 1e-6 * max(1.0, np.max(np.abs(want)))
    # identical-input fast path agrees with the permutation sum
    x = forms[0]
    assert (m_ell(ctx, [x, x, x]) - m_general(ctx, [x, x, x])).max_abs(ch, pts) < 1e-10


def test_m3_symmetry(curved):
    ch, ctx, pts = curved
    rng = rng_for(6)
    a, b, c = (random_form(ch, 1, rng, nterms=1) for _ in range(3))
    base = m_ell(ctx, [a, b, c])
    for perm in [(b, a, c), (c, b, a), (a, c, b)]:
        assert (base - m_ell(ctx, list(perm))).max_abs(ch, pts) < 1e-12


def test_m3_mixed_degree_symmetry(curved):
    ch, ctx, pts = curved
    rng = rng_for(7)
    a, b, c = random_form(ch, 2, rng, nterms=1), random_form(ch, 1, rng, nterms=1), random_form(ch, 1, rng, nterms=1)
    # swapping a shifted-degree-1 input with shifted-degree-0 inputs carries no sign
    assert (m_ell(ctx, [a, b, c]) - m_ell(ctx, [b, a, c])).max_abs(ch, pts) < 1e-12


def test_higher_maps_vanish_when_flat():
    ch = random_flat_chart(1, 3, 4)
    ctx = LInftyContext(ch)
    assert LInftyContext(FT).flat
    rng = rng_for(4)
    xs = [random_form(ch, 1, rng, nterms=1) for _ in range(3)]
    pts = ch.sample(20)
    assert m_general(ctx, xs).max_abs(ch, pts) < 1e-12
    assert m_ell(ctx, xs).max_abs(ch, pts) < 1e-12
    assert m_ell(LInftyContext(FT), [one_form(2, parse("sin(2*pi*y1)"), 0)] * 3).is_zero


def test_unsupported_degree0(curved):
    ch, ctx, _ = curved
    rng = rng_for(1)
    with pytest.raises(UnsupportedInput):
        m_ell(ctx, [random_form(ch, 0, rng), random_form(ch, 1, rng), random_form(ch, 1, rng)])


def test_context_validation():
    with pytest.raises(ValueError):
        LInftyContext(FT, max_arity=1)
    with pytest.raises(ValueError):
        LInftyContext(FT, shift=0)
    with pytest.raises(ValueError):
        linfty_residual(LInftyContext(FT, max_arity=2), 3, [one_form(2, 1, 0)] * 3)


def test_sign_helpers():
    assert slot_sign([1, 1, 1]) == 1
    assert koszul_sign((1, 0), [1, 1]) == -1
    assert koszul_sign((1, 0), [0, 1]) == 1


@pytest.mark.parametrize("degs", [(0,), (1,), (2,)])
def test_linfty_n1(curved, degs):
    ch, ctx, pts = curved
    xs = [random_form(ch, d, rng_for(sum(degs)), nterms=1) for d in degs]
    assert linfty_residual(ctx, 1, xs, points=pts) < 1e-10


@pytest.mark.parametrize("degs", [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2)])
def test_linfty_n2(curved, degs):
    ch, ctx, pts = curved
    rng = rng_for(len(degs) + 3 * sum(degs))
    xs = [random_form(ch, d, rng, nterms=1) for d in degs]
    assert linfty_residual(ctx, 2, xs, points=pts) < 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_linfty_n3(curved, seed):
    ch, ctx, pts = curved
    rng = rng_for(seed)
    xs = [random_form(ch, 1, rng, nterms=1) for _ in range(3)]
    assert linfty_residual(ctx, 3, xs, points=pts) < 1e-8


def test_linfty_n3_sign_mutation(curved):
    # flipping the overall sign of m_l, l >= 3, must break the n = 3 relation
    ch, _, pts = curved
    bad = LInftyContext(ch, higher_sign=-1)
    rng = rng_for(0)
    xs = [random_form(ch, 1, rng, nterms=1) for _ in range(3)]
    assert linfty_residual(bad, 3, xs, points=pts) > 1e-3


def test_linfty_n4():
    ch = random_torus_chart(1, 3, 3, nterms=1)
    ctx = LInftyContext(ch)
    x = random_form(ch, 1, rng_for(3), nterms=1)
    pts = ch.sample(10, 3)
    res = linfty_residual(ctx, 4, [x] * 4, points=pts)
    scale = max(t.max_abs(ch, pts) for t in [m_ell(ctx, [x] * 4)])
    assert res < 1e-8 * max(1.0, scale)


def test_flat_dgla_leibniz_and_jacobi():
    ctx = LInftyContext(FT)
    rng = rng_for(9)
    pts = FT.sample(50)
    a, b = random_form(FT, 0, rng), random_form(FT, 1, rng)
    lhs = d_F(FT, bracket(ctx, a, b))
    rhs = bracket(ctx, d_F(FT, a), b) + bracket(ctx, a, d_F(FT, b))
    assert (lhs - rhs).max_abs(FT, pts) < 1e-9
    fl = random_flat_chart(1, 3, 2)
    fctx = LInftyContext(fl)
    xs = [random_form(fl, 1, rng, nterms=1) for _ in range(3)]
    assert linfty_residual(fctx, 3, xs, points=fl.sample(50)) < 1e-9
    xs = [random_form(fl, 0, rng, nterms=1), random_form(fl, 1, rng, nterms=1)]
    assert linfty_residual(fctx, 2, xs, points=fl.sample(50)) < 1e-9
