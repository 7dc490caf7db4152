import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shla.chart import ChartSpec, builtin_flat_torus, builtin_oscillator
from shla.expr import ZERO, diff, num, parse, sym
from shla.foliation import (DegreeError, TransverseField, curvature_dual, mean_curvature,
                            mean_curvature_at, perm_sign, pi_bracket, pi_differential,
                            splitting_transform, transverse_curvature)
from shla.randgen import random_torus_chart, random_transverse, rng_for

seeds = st.integers(0, 10_000)


def test_flat_and_oscillator_curvature_vanish():
    assert transverse_curvature(builtin_flat_torus()).max_abs(builtin_flat_torus(), builtin_flat_torus().sample(20)) == 0
    osc = builtin_oscillator()
    assert transverse_curvature(osc).max_abs(osc, osc.sample(100)) < 1e-12
    assert mean_curvature(osc).max_abs(osc, osc.sample(50)) < 1e-12


def test_single_component_chart():
    # k=1, r=1, R^1_1 = q1*y2: F_12 = -Y_2(R_1) = -q1 (R_2 = 0)
    y, q = ("y1", "y2"), ("q1",)
    ch = ChartSpec(1, 1, y, q, ((num(0), num(1)), (num(-1), num(0))),
                   ((parse("q1*y2"),), (ZERO,)), {c: None for c in y + q}, {}, {}, "tiny")
    F = transverse_curvature(ch)
    pts = ch.sample(30)
    got = F.evaluate(ch, pts)[:, 0, 0]
    assert np.allclose(got, -pts["q1"])
    assert np.allclose(curvature_dual(ch, pts)[:, 0, 0], got, atol=1e-8)


@given(seeds, st.sampled_from([(1, 1), (1, 2), (2, 1)]))
def test_curvature_matches_commutator(seed, kr):
    ch = random_torus_chart(*kr, seed, nterms=1)
    pts = ch.sample(20, seed)
    F = transverse_curvature(ch).evaluate(ch, pts)
    assert np.max(np.abs(F - curvature_dual(ch, pts))) < 1e-6 * max(1.0, np.max(np.abs(F)))


@given(seeds)
def test_first_bianchi(seed):
    ch = random_torus_chart(2, 1, seed, nterms=1)
    assert pi_differential(ch, transverse_curvature(ch)).max_abs(ch, ch.sample(50, seed)) < 1e-8


@given(seeds)
def test_second_bianchi_degree0(seed):
    ch = random_torus_chart(2, 2, seed, nterms=1)
    B = random_transverse(ch, 0, rng_for(seed), nterms=1)
    lhs = pi_differential(ch, pi_differential(ch, B))
    assert (lhs - pi_bracket(ch, transverse_curvature(ch), B)).max_abs(ch, ch.sample(50, seed)) < 1e-8


@given(seeds, st.integers(0, 1))
def test_normalizations_relate(seed, l):
    # d^2 B = C(l+2, 2) [F, B]_wedge1 = [F, B]_shuffle
    ch = random_torus_chart(2, 1, seed, nterms=1)
    B = random_transverse(ch, l, rng_for(seed), nterms=1)
    F = transverse_curvature(ch)
    pts = ch.sample(30, seed)
    d2 = pi_differential(ch, pi_differential(ch, B))
    sh = pi_bracket(ch, F, B, "shuffle")
    w1 = pi_bracket(ch, F, B).scale(num(math.comb(l + 2, 2)))
    assert (d2 - sh).max_abs(ch, pts) < 1e-8
    assert (sh - w1).max_abs(ch, pts) < 1e-10


@given(seeds)
def test_transformation_law(seed):
    ch = random_torus_chart(1, 2, seed, nterms=1)
    B = random_transverse(ch, 1, rng_for(seed + 1), nterms=1)
    new = splitting_transform(ch, B)
    law = transverse_curvature(ch) + pi_differential(ch, B) + pi_bracket(ch, B, B)
    assert (transverse_curvature(new) - law).max_abs(ch, ch.sample(50, seed)) < 1e-8


def test_transform_from_flat_torus():
    ft = builtin_flat_torus()
    B = random_transverse(ft, 1, rng_for(2), nterms=1)
    new = splitting_transform(ft, B)
    pts = ft.sample(40)
    F = transverse_curvature(new)
    assert F.max_abs(ft, pts) > 1e-3
    # d^0 uses plain y-derivatives on the flat torus
    manual = {}
    for i, j in [(0, 1)]:
        manual[(i, j)] = tuple(diff(B.value((j,))[b], f"y{i + 1}") - diff(B.value((i,))[b], f"y{j + 1}")
                               for b in range(2))
    d0 = TransverseField(2, 2, 2, manual)
    assert (F - d0 - pi_bracket(ft, B, B)).max_abs(ft, pts) < 1e-10
    assert splitting_transform(ft, TransverseField.zero(1, 2, 2)).chart_hash() == ft.chart_hash()


@given(seeds)
def test_bracket_antisymmetry_11(seed):
    ch = random_torus_chart(1, 2, seed, nterms=1)
    rng = rng_for(seed)
    B, C = random_transverse(ch, 1, rng, 1), random_transverse(ch, 1, rng, 1)
    pts = ch.sample(20, seed)
    # for degrees (1, 1) the graded sign is (-1)^(1*1 + 1) = +1 on the components once i<->j relabeled
    assert (pi_bracket(ch, B, C) - pi_bracket(ch, C, B)).max_abs(ch, pts) < 1e-12


def test_bracket_with_q_independent_field():
    ch = random_torus_chart(1, 1, 4, nterms=1)
    y = sym("y1")
    C = TransverseField(1, 2, 1, {(0,): (y,), (1,): (ZERO,)})
    B = TransverseField(1, 2, 1, {(0,): (ZERO,), (1,): (parse("sin(2*pi*q1)"),)})
    pts = ch.sample(10)
    br = pi_bracket(ch, B, C).evaluate(ch, pts)[:, 0, 0]
    # only -C^a dB/dq^a survives: -(1/2)(-C_1 dB_2/dq) sign from averaging
    want = 0.5 * pts["y1"] * 2 * np.pi * np.cos(2 * np.pi * pts["q1"])
    assert np.allclose(br, want)


def test_degree_overflow():
    ft = builtin_flat_torus()
    F = transverse_curvature(ft)
    with pytest.raises(DegreeError):
        pi_differential(ft, F)
    with pytest.raises(DegreeError):
        pi_bracket(ft, F, TransverseField.zero(1, 2, 2))
    with pytest.raises(ValueError):
        pi_bracket(ft, TransverseField.zero(1, 2, 2), TransverseField.zero(1, 2, 2), "bogus")


@given(seeds)
def test_mean_curvature_matches_pointwise(seed):
    ch = random_torus_chart(1, 2, seed, nterms=1)
    pts = ch.sample(30, seed)
    rho = mean_curvature(ch).evaluate(ch, pts)[:, 0, :]
    assert np.allclose(rho, mean_curvature_at(ch, pts), atol=1e-10)


def test_mean_curvature_k2():
    ch = random_torus_chart(2, 1, 9, nterms=1)
    pts = ch.sample(20)
    assert np.allclose(mean_curvature(ch).evaluate(ch, pts)[:, 0, :], mean_curvature_at(ch, pts), atol=1e-10)


def test_perm_sign():
    for p in itertools.permutations(range(4)):
        inv = sum(1 for a, b in itertools.combinations(p, 2) if a > b)
        assert perm_sign(p) == (-1) ** inv
    assert perm_sign((1, 1)) == 0
