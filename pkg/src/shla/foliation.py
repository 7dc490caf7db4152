"""Transverse calculus of a splitting: curvature, Pi-differential, Pi-bracket.

A TransverseField of degree l stores, for each increasing multi-index
I = (i1 < ... < il), the leafwise vector B(Y_i1, ..., Y_il) as r Exprs.
So components are values on the horizontal frame Y_i.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chart import ChartSpec, ChartError
from .expr import ZERO, Expr, as_expr, diff, num


class DegreeError(ValueError):
    pass


def perm_sign(seq) -> int:
    """Sign of the permutation sorting seq (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    s = 1
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                s = -s
    return s


@dataclass(frozen=True, eq=False)
class TransverseField:
    degree: int
    twok: int
    r: int
    comps: dict    # increasing index tuple -> tuple of r Exprs

    @classmethod
    def zero(cls, degree, twok, r):
        return cls(degree, twok, r, {})

    @classmethod
    def from_components(cls, degree, twok, r, comps):
        clean = {}
        for I, vec in comps.items():
            I = tuple(I)
            sgn = perm_sign(I)
            if sgn == 0:
                continue
            key = tuple(sorted(I))
            vec = tuple(as_expr(v) if sgn > 0 else -as_expr(v) for v in vec)
            if key in clean:
                vec = tuple(a + b for a, b in zip(clean[key], vec))
            clean[key] = vec
        return cls(degree, twok, r, clean)

    def value(self, I):
        """Component on an arbitrary index tuple, using antisymmetry."""
        sgn = perm_sign(I)
        if sgn == 0:
            return (ZERO,) * self.r
        vec = self.comps.get(tuple(sorted(I)))
        if vec is None:
            return (ZERO,) * self.r
        return vec if sgn > 0 else tuple(-v for v in vec)

    def indices(self):
        return list(itertools.combinations(range(self.twok), self.degree))

    def __add__(self, other):
        _same_shape(self, other)
        out = dict(self.comps)
        for I, vec in other.comps.items():
            out[I] = tuple(a + b for a, b in zip(out.get(I, (ZERO,) * self.r), vec))
        return TransverseField(self.degree, self.twok, self.r, out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        c = as_expr(c)
        return TransverseField(self.degree, self.twok, self.r,
                               {I: tuple(c * v for v in vec) for I, vec in self.comps.items()})

    def evaluate(self, chart: ChartSpec, point) -> np.ndarray:
        """Array of shape (npts, C(2k, l), r) in the order of indices()."""
        idx = self.indices()
        flat = [e for I in idx for e in self.value(I)]
        if not flat:
            return np.zeros((0,))
        vals = chart.eval(flat, point)
        n = np.broadcast(*[np.asarray(v) for v in vals] + [np.asarray(0.0)]).shape
        arr = np.stack([np.broadcast_to(np.asarray(v, float), n) for v in vals], axis=-1)
        return arr.reshape(n + (len(idx), self.r))

    def max_abs(self, chart, point) -> float:
        a = self.evaluate(chart, point)
        return float(np.max(np.abs(a))) if a.size else 0.0


def _same_shape(a, b):
    if (a.degree, a.twok, a.r) != (b.degree, b.twok, b.r):
        raise ValueError("transverse fields of different shape")


# ---------------------------------------------------------------- vertical calculus

def lie_Y(chart: ChartSpec, j: int, u):
    """Lie derivative of the leafwise vector field u along Y_j, i.e. [Y_j, u]."""
    out = []
    for b in range(chart.r):
        v = chart.Y(j, u[b])
        for a in range(chart.r):
            if u[a].is_zero:
                continue
            dR = diff(chart.R[j][b], chart.q[a])
            if not dR.is_zero:
                v = v - u[a] * dR
        out.append(v)
    return tuple(out)


def vertical_bracket(chart: ChartSpec, u, v):
    """[u, v]^b = u^a dv^b/dq^a - v^a du^b/dq^a."""
    out = []
    for b in range(chart.r):
        t = ZERO
        for a, qa in enumerate(chart.q):
            if not u[a].is_zero:
                t = t + u[a] * diff(v[b], qa)
            if not v[a].is_zero:
                t = t - v[a] * diff(u[b], qa)
        out.append(t)
    return tuple(out)


# ---------------------------------------------------------------- operations

def transverse_curvature(chart: ChartSpec) -> TransverseField:
    """F_ij = Y_i R_j - Y_j R_i, the vertical field [Y_i, Y_j]."""
    comps = {}
    for i, j in itertools.combinations(range(chart.twok), 2):
        comps[(i, j)] = tuple(chart.Y(i, chart.R[j][b]) - chart.Y(j, chart.R[i][b]) for b in range(chart.r))
    return TransverseField(2, chart.twok, chart.r, comps)


def curvature_dual(chart: ChartSpec, point, h: float = 1e-4) -> np.ndarray:
    """Independent numeric curvature: the commutator [Y_i, Y_j] by finite differences.

    Returns an array (npts, C(2k,2), r). Used only as a test oracle.
    """
    coords = chart.coords
    base = {c: np.atleast_1d(np.asarray(point[c], float)) for c in coords}
    npts = len(next(iter(base.values()))) if base else 1
    Rflat = [chart.R[i][a] for i in range(chart.twok) for a in range(chart.r)]

    def Yvec(pt):
        vals = chart.eval(Rflat, pt)
        vals = np.stack([np.broadcast_to(np.asarray(v, float), (npts,)) for v in vals], axis=-1)
        Rm = vals.reshape(npts, chart.twok, chart.r)
        vec = np.zeros((npts, chart.twok, chart.dim))
        for i in range(chart.twok):
            vec[:, i, i] = 1.0
            vec[:, i, chart.twok:] = Rm[:, i, :]
        return vec

    # directional derivative of the Y fields along each coordinate (Richardson)
    def dY(c):
        def at(step):
            hi = dict(base)
            lo = dict(base)
            hi[c] = base[c] + step
            lo[c] = base[c] - step
            return (Yvec(hi) - Yvec(lo)) / (2 * step)
        return (4 * at(h / 2) - at(h)) / 3

    Y0 = Yvec(base)
    D = np.stack([dY(c) for c in coords], axis=-1)   # (npts, 2k, dim, dim_deriv)
    out = []
    for i, j in itertools.combinations(range(chart.twok), 2):
        br = np.einsum("nc,nac->na", Y0[:, i, :], D[:, j]) - np.einsum("nc,nac->na", Y0[:, j, :], D[:, i])
        out.append(br[:, chart.twok:])
    return np.stack(out, axis=1)


def pi_differential(chart: ChartSpec, B: TransverseField, strict: bool = True) -> TransverseField:
    """(d B)(Y_j0..Y_jl) = sum_m (-1)^m L_{Y_jm} B(..., hat jm, ...)."""
    l = B.degree
    if l + 1 > chart.twok:
        if strict:
            raise DegreeError(f"degree overflow: d^Pi of a degree-{l} field with 2k = {chart.twok}")
        return TransverseField.zero(l + 1, chart.twok, chart.r)
    comps = {}
    for J in itertools.combinations(range(chart.twok), l + 1):
        acc = [ZERO] * chart.r
        for m, jm in enumerate(J):
            rest = J[:m] + J[m + 1:]
            vec = B.value(rest)
            if all(v.is_zero for v in vec):
                continue
            lv = lie_Y(chart, jm, vec)
            for b in range(chart.r):
                acc[b] = acc[b] - lv[b] if m % 2 else acc[b] + lv[b]
        comps[J] = tuple(acc)
    return TransverseField(l + 1, chart.twok, chart.r, comps)


def pi_bracket(chart: ChartSpec, B: TransverseField, C: TransverseField,
               normalization: str = "wedge1") -> TransverseField:
    """Bracket of vector-valued transverse forms.

    normalization="wedge1" averages over all permutations with weight
    1/(l1+l2)!; normalization="shuffle" sums over shuffles with weight 1.
    See docs/brackets.md for why wedge1 is the default.
    """
    l1, l2 = B.degree, C.degree
    n = l1 + l2
    if n > chart.twok:
        raise DegreeError(f"degree overflow: bracket of degrees {l1}, {l2} with 2k = {chart.twok}")
    if normalization == "wedge1":
        weight = num(math.factorial(l1) * math.factorial(l2)) / math.factorial(n)
    elif normalization == "shuffle":
        weight = num(1)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    comps = {}
    for J in itertools.combinations(range(chart.twok), n):
        acc = [ZERO] * chart.r
        # shuffles: choose which slots go to B; each shuffle class has l1! l2! permutations
        for left in itertools.combinations(range(n), l1):
            right = tuple(p for p in range(n) if p not in left)
            sgn = perm_sign(left + right)
            u = B.value(tuple(J[p] for p in left))
            v = C.value(tuple(J[p] for p in right))
            if all(x.is_zero for x in u) or all(x.is_zero for x in v):
                continue
            br = vertical_bracket(chart, u, v)
            for b in range(chart.r):
                acc[b] = acc[b] + br[b] if sgn > 0 else acc[b] - br[b]
        comps[J] = tuple(weight * a for a in acc)
    return TransverseField(n, chart.twok, chart.r, comps)


def splitting_transform(chart: ChartSpec, B: TransverseField) -> ChartSpec:
    """New splitting with coefficients R + B."""
    if B.degree != 1 or B.twok != chart.twok or B.r != chart.r:
        raise ValueError("B must be a degree-1 field on the same chart")
    R = [[chart.R[i][a] + B.value((i,))[a] for a in range(chart.r)] for i in range(chart.twok)]
    return chart.with_R(R)


def mean_curvature(chart: ChartSpec, F: TransverseField | None = None) -> TransverseField:
    """rho = (1/2k) F_ij w^ij with w^ij the inverse of omega (summed over all i, j)."""
    if chart.twok == 0:
        return TransverseField.zero(0, 0, chart.r)
    F = F or transverse_curvature(chart)
    winv = chart.omega_inv
    acc = [ZERO] * chart.r
    for i, j in itertools.combinations(range(chart.twok), 2):
        # F_ij w^ij + F_ji w^ji = F_ij (w^ij - w^ji)
        c = winv[i][j] - winv[j][i]
        for b in range(chart.r):
            acc[b] = acc[b] + F.value((i, j))[b] * c
    return TransverseField(0, chart.twok, chart.r, {(): tuple(a / chart.twok for a in acc)})


def mean_curvature_at(chart: ChartSpec, point) -> np.ndarray:
    """Numeric pointwise contraction, for any 2k."""
    F = transverse_curvature(chart)
    Fv = F.evaluate(chart, point)                       # (n, pairs, r)
    winv = np.linalg.inv(chart.omega_at(point))         # (n, 2k, 2k)
    full = np.zeros(Fv.shape[:1] + (chart.twok, chart.twok, chart.r))
    for p, (i, j) in enumerate(F.indices()):
        full[:, i, j] = Fv[:, p]
        full[:, j, i] = -Fv[:, p]
    return np.einsum("nijb,nij->nb", full, winv) / chart.twok
