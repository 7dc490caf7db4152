"""Leafwise forms in the frame f*_a = dq^a - R^a_i dy^i.

A LeafForm of degree l maps increasing index tuples (a1 < ... < al) to
Expr coefficients. In the f* frame the leafwise differential only sees
q-derivatives, and nabla_i is the Lie derivative along Y_i.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chart import ChartSpec
from .expr import ZERO, Expr, as_expr, diff, num
from .foliation import DegreeError, TransverseField, perm_sign


def _merge_sign(I, J):
    """Sign and sorted union of the wedge theta^I ^ theta^J (0 if they overlap)."""
    if set(I) & set(J):
        return 0, None
    s = perm_sign(tuple(I) + tuple(J))
    return s, tuple(sorted(I + J))


@dataclass(frozen=True, eq=False)
class LeafForm:
    degree: int
    r: int
    coeffs: dict   # increasing tuple -> Expr; missing keys are zero

    @classmethod
    def zero(cls, degree, r):
        return cls(degree, r, {})

    @classmethod
    def from_dict(cls, degree, r, coeffs):
        out = {}
        for I, v in coeffs.items():
            I = tuple(I)
            s = perm_sign(I)
            if s == 0:
                continue
            key = tuple(sorted(I))
            v = as_expr(v)
            v = v if s > 0 else -v
            out[key] = out[key] + v if key in out else v
        return cls(degree, r, {k: v for k, v in out.items() if not v.is_zero})

    @classmethod
    def scalar(cls, f, r):
        f = as_expr(f)
        return cls(0, r, {} if f.is_zero else {(): f})

    def __getitem__(self, I):
        s = perm_sign(I)
        if s == 0:
            return ZERO
        v = self.coeffs.get(tuple(sorted(I)), ZERO)
        return v if s > 0 else -v

    @property
    def is_zero(self):
        return all(v.is_zero for v in self.coeffs.values())

    def indices(self):
        return list(itertools.combinations(range(self.r), self.degree))

    # ---------------------------------------------------------- algebra
    def __add__(self, other):
        if other.degree != self.degree:
            raise ValueError(f"cannot add forms of degree {self.degree} and {other.degree}")
        out = dict(self.coeffs)
        for I, v in other.coeffs.items():
            out[I] = out[I] + v if I in out else v
        return LeafForm(self.degree, self.r, {k: v for k, v in out.items() if not v.is_zero})

    def __neg__(self):
        return LeafForm(self.degree, self.r, {I: -v for I, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = as_expr(c)
        if c.is_zero:
            return LeafForm.zero(self.degree, self.r)
        return LeafForm(self.degree, self.r, {I: c * v for I, v in self.coeffs.items()})

    def wedge(self, other):
        out = {}
        for I, a in self.coeffs.items():
            for J, b in other.coeffs.items():
                s, K = _merge_sign(I, J)
                if not s:
                    continue
                t = a * b if s > 0 else -(a * b)
                out[K] = out[K] + t if K in out else t
        return LeafForm(self.degree + other.degree, self.r, {k: v for k, v in out.items() if not v.is_zero})

    def __xor__(self, other):
        return self.wedge(other)

    def contract(self, a: int):
        """Left interior product with d/dq^a (in the f* frame)."""
        out = {}
        for I, v in self.coeffs.items():
            if a in I:
                pos = I.index(a)
                J = I[:pos] + I[pos + 1:]
                out[J] = -v if pos % 2 else v
        return LeafForm(self.degree - 1, self.r, out)

    def map_coeffs(self, fn):
        out = {I: fn(v) for I, v in self.coeffs.items()}
        return LeafForm(self.degree, self.r, {k: v for k, v in out.items() if not v.is_zero})

    # ---------------------------------------------------------- numerics
    def evaluate(self, chart: ChartSpec, point) -> np.ndarray:
        """Coefficients at points, shape (npts, C(r, l)) in indices() order."""
        idx = self.indices()
        exprs = [self[I] for I in idx]
        vals = chart.eval(exprs, point) if exprs else []
        n = np.broadcast(*[np.asarray(v) for v in vals] + [np.asarray(next(iter(point.values()), 0.0))]).shape
        if not idx:
            return np.zeros(n + (0,))
        return np.stack([np.broadcast_to(np.asarray(v, float), n) for v in vals], axis=-1)

    def max_abs(self, chart, point) -> float:
        a = self.evaluate(chart, point)
        return float(np.max(np.abs(a))) if a.size else 0.0

    # ---------------------------------------------------------- io
    def to_json(self):
        return {"degree": self.degree,
                "coeff": {"".join(str(a + 1) for a in I) if I else "0": str(v) for I, v in sorted(self.coeffs.items())}}

    @classmethod
    def from_json(cls, doc, r):
        deg = int(doc["degree"])
        coeffs = {}
        for key, s in doc.get("coeff", {}).items():
            I = () if key in ("", "0") else tuple(int(ch) - 1 for ch in key)
            if len(I) != deg:
                raise ValueError(f"index {key!r} does not match degree {deg}")
            if any(a < 0 or a >= r for a in I):
                raise ValueError(f"index {key!r} out of range for r = {r}")
            coeffs[I] = as_expr(s)
        return cls.from_dict(deg, r, coeffs)


def one_form(r, *coeffs):
    return LeafForm.from_dict(1, r, {(a,): c for a, c in enumerate(coeffs)})


# ---------------------------------------------------------------- operators

def d_F(chart: ChartSpec, xi: LeafForm, strict: bool = True) -> LeafForm:
    """Leafwise exterior derivative: theta^b d/dq^b acting from the left."""
    if strict and xi.degree >= chart.r:
        raise DegreeError(f"degree overflow: d_F of a degree-{xi.degree} form with r = {chart.r}")
    out = {}
    for I, v in xi.coeffs.items():
        for b, qb in enumerate(chart.q):
            if b in I:
                continue
            dv = diff(v, qb)
            if dv.is_zero:
                continue
            s, K = _merge_sign((b,), I)
            t = dv if s > 0 else -dv
            out[K] = out[K] + t if K in out else t
    return LeafForm(xi.degree + 1, chart.r, {k: v for k, v in out.items() if not v.is_zero})


def nabla(chart: ChartSpec, xi: LeafForm, i: int) -> LeafForm:
    """Transverse covariant derivative: Lie derivative of xi along Y_i.

    On one-forms (nabla_i xi)_a = Y_i(xi_a) + xi_b dR_i^b/dq^a; on higher
    degrees each slot is treated by the Leibniz rule.
    """
    out = {}

    def put(K, t):
        out[K] = out[K] + t if K in out else t

    for I, v in xi.coeffs.items():
        put(I, chart.Y(i, v))
        # replace theta^b in slot by dR_i^b/dq^a theta^a
        for pos, b in enumerate(I):
            for a, qa in enumerate(chart.q):
                dR = diff(chart.R[i][b], qa)
                if dR.is_zero:
                    continue
                J = I[:pos] + (a,) + I[pos + 1:]
                s = perm_sign(J)
                if s == 0:
                    continue
                t = v * dR
                put(tuple(sorted(J)), t if s > 0 else -t)
    return LeafForm(xi.degree, chart.r, {k: v for k, v in out.items() if not v.is_zero})


def scalar_Y(chart: ChartSpec, f, i: int):
    return chart.Y(i, as_expr(f))


# ---------------------------------------------------------------- matrices

@dataclass(frozen=True, eq=False)
class MatrixLeafForm:
    """Square array of LeafForms of a common degree (rows i, columns j)."""
    entries: tuple

    @property
    def n(self):
        return len(self.entries)

    @property
    def degree(self):
        return self.entries[0][0].degree if self.entries else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __matmul__(self, other):
        n = self.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = None
                for m in range(n):
                    t = self.entries[i][m].wedge(other.entries[m][j])
                    acc = t if acc is None else acc + t
                row.append(acc)
            rows.append(tuple(row))
        return MatrixLeafForm(tuple(rows))

    def left_scalar(self, M):
        """Multiply on the left by a matrix of scalar Exprs."""
        n = self.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = LeafForm.zero(self.degree, self.entries[0][0].r)
                for m in range(n):
                    if not M[i][m].is_zero:
                        acc = acc + self.entries[m][j].scale(M[i][m])
                row.append(acc)
            rows.append(tuple(row))
        return MatrixLeafForm(tuple(rows))

    @classmethod
    def scalars(cls, M, r):
        return cls(tuple(tuple(LeafForm.scalar(M[i][j], r) for j in range(len(M))) for i in range(len(M))))

    def evaluate(self, chart, point) -> np.ndarray:
        """Shape (npts, n, n, C(r, l))."""
        return np.stack([np.stack([self.entries[i][j].evaluate(chart, point) for j in range(self.n)], axis=1)
                         for i in range(self.n)], axis=1)


def fsharp_contract(chart: ChartSpec, F: TransverseField, xi: LeafForm) -> MatrixLeafForm:
    """Entry (i, j) = sum_a F^{a j}_i iota_a xi with F^{a j}_i = F^a_{ik} w^{kj}."""
    if xi.degree < 1:
        raise DegreeError("F#-contraction needs a form of degree >= 1")
    n = chart.twok
    winv = chart.omega_inv
    contr = [xi.contract(a) for a in range(chart.r)]
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = LeafForm.zero(xi.degree - 1, chart.r)
            for a in range(chart.r):
                if contr[a].is_zero:
                    continue
                c = ZERO
                for k in range(n):
                    Fa = F.value((i, k))[a]
                    if not Fa.is_zero and not winv[k][j].is_zero:
                        c = c + Fa * winv[k][j]
                if not c.is_zero:
                    acc = acc + contr[a].scale(c)
            row.append(acc)
        rows.append(tuple(row))
    return MatrixLeafForm(tuple(rows))


def ftilde_contract(chart: ChartSpec, F: TransverseField, s: LeafForm) -> list:
    """(F contracted with s)_{ij} = F^a_ij iota_a s, as scalar Exprs for a one-form s."""
    n = chart.twok
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = ZERO
            for a in range(chart.r):
                Fa = F.value((i, j))[a]
                if not Fa.is_zero and not s[(a,)].is_zero:
                    acc = acc + Fa * s[(a,)]
            out[i][j] = acc
    return out
