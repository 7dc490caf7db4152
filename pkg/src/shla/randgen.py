"""Seeded random charts and forms (trigonometric polynomials) for tests and experiments."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .chart import ChartSpec
from .expr import PI, ZERO, cos, diff, num, sin, sym


def rng_for(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _coef(rng, scale=Fraction(1, 2), den=64):
    # exact rational in [-scale, scale]
    return Fraction(int(rng.integers(-den, den + 1)), den) * scale


def random_trig(names, rng, degree=2, nterms=3, scale=Fraction(1, 2), constant=True):
    """Sum of a few c*sin/cos(2 pi m.x) with |m|_inf <= degree."""
    names = list(names)
    e = num(_coef(rng, scale)) if constant else ZERO
    if not names:
        return e
    for _ in range(nterms):
        m = rng.integers(-degree, degree + 1, size=len(names))
        if not m.any():
            m[rng.integers(len(names))] = 1
        arg = ZERO
        for mi, x in zip(m, names):
            if mi:
                arg = arg + num(int(mi)) * sym(x)
        f = sin if rng.random() < 0.5 else cos
        e = e + num(_coef(rng, scale)) * f(2 * PI * arg)
    return e


def darboux(k):
    n = 2 * k
    w = [[num(0)] * n for _ in range(n)]
    for i in range(k):
        w[2 * i][2 * i + 1] = num(1)
        w[2 * i + 1][2 * i] = num(-1)
    return w


def random_closed_omega(k, ynames, rng, amp=Fraction(1, 8)):
    """Darboux form plus d(alpha) for a small random 1-form alpha(y): closed by construction."""
    n = 2 * k
    w = darboux(k)
    alpha = [random_trig(ynames, rng, degree=1, nterms=1, scale=amp, constant=False) for _ in range(n)]
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            out[i][j] = w[i][j] + diff(alpha[j], ynames[i]) / (2 * PI) - diff(alpha[i], ynames[j]) / (2 * PI)
    return tuple(tuple(row) for row in out)


def random_torus_chart(k, r, seed, flat=False, curved_omega=True, nterms=2, name=None) -> ChartSpec:
    rng = rng_for(seed)
    y = tuple(f"y{i + 1}" for i in range(2 * k))
    q = tuple(f"q{a + 1}" for a in range(r))
    if curved_omega and k > 0:
        omega = random_closed_omega(k, y, rng)
    else:
        omega = tuple(tuple(row) for row in darboux(k))
    if flat:
        R = tuple(tuple(ZERO for _ in q) for _ in y)
    else:
        R = tuple(tuple(random_trig(y + q, rng, nterms=nterms) for _ in q) for _ in y)
    periods = {c: 1.0 for c in y + q}
    return ChartSpec(k, r, y, q, omega, R, periods, {}, {}, name or f"random_k{k}_r{r}_s{seed}")


def random_form(chart, degree, rng, nterms=2, scale=Fraction(1, 2), names=None):
    from .forms import LeafForm
    names = chart.coords if names is None else names
    coeffs = {}
    for I in itertools.combinations(range(chart.r), degree):
        coeffs[I] = random_trig(names, rng, nterms=nterms, scale=scale)
    return LeafForm(degree, chart.r, coeffs)


def random_transverse(chart, degree, rng, nterms=2):
    from .foliation import TransverseField
    comps = {}
    for I in itertools.combinations(range(chart.twok), degree):
        comps[I] = tuple(random_trig(chart.coords, rng, nterms=nterms) for _ in range(chart.r))
    return TransverseField(degree, chart.twok, chart.r, comps)


def random_flat_chart(k, r, seed, curved_omega=True, name=None) -> ChartSpec:
    """Torus chart with an integrable splitting R_i = d phi / dy^i, phi = phi(y), so F = 0 but R != 0."""
    rng = rng_for(seed)
    y = tuple(f"y{i + 1}" for i in range(2 * k))
    q = tuple(f"q{a + 1}" for a in range(r))
    omega = random_closed_omega(k, y, rng) if curved_omega else tuple(tuple(row) for row in darboux(k))
    phi = [random_trig(y, rng, degree=1, nterms=2, constant=False) / (2 * PI) for _ in q]
    R = tuple(tuple(diff(phi[a], yi) for a in range(r)) for yi in y)
    periods = {c: 1.0 for c in y + q}
    return ChartSpec(k, r, y, q, omega, R, periods, {}, {}, name or f"flat_k{k}_r{r}_s{seed}")
