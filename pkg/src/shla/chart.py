"""Pre-symplectic foliation charts.

A chart carries transverse coordinates y^1..y^{2k}, leaf coordinates
q^1..q^r, the transverse form omega_ij(y) and the splitting coefficients
R_i^alpha(y, q), so that Y_i = d/dy^i + R_i^alpha d/dq^alpha spans the
horizontal distribution.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.stats import qmc

from .expr import (ZERO, Expr, UnboundSymbolError, as_expr, diff, evaluate_many,
                   free_symbols, num, parse, substitute, sym)

SAMPLE_SEED = 7
DEFAULT_SAMPLES = 64


class ChartError(ValueError):
    pass


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v).limit_denominator(10**12)


@dataclass(frozen=True, eq=False)
class ChartSpec:
    k: int
    r: int
    y: tuple
    q: tuple
    omega: tuple                      # 2k x 2k Expr
    R: tuple                          # 2k x r Expr, R[i][alpha]
    periods: dict = field(default_factory=dict)   # name -> float | None
    params: dict = field(default_factory=dict)    # name -> Fraction
    bounds: dict = field(default_factory=dict)    # nonperiodic name -> (lo, hi)
    name: str = "chart"

    # ------------------------------------------------------------ basics
    @property
    def twok(self):
        return 2 * self.k

    @property
    def coords(self):
        return tuple(self.y) + tuple(self.q)

    @property
    def dim(self):
        return self.twok + self.r

    @property
    def is_torus(self):
        return all(self.periods.get(c) is not None for c in self.coords)

    def period(self, c):
        return self.periods.get(c)

    def box(self, c):
        p = self.periods.get(c)
        if p is not None:
            return 0.0, float(p)
        return tuple(float(b) for b in self.bounds.get(c, (0.0, 1.0)))

    def contains(self, point: Mapping[str, float]) -> bool:
        """Whether a point lies in the chart domain (open bounds on nonperiodic coordinates)."""
        for c in self.coords:
            if self.periods.get(c) is None and c in self.bounds:
                lo, hi = self.bounds[c]
                v = np.asarray(point[c], dtype=float)
                if np.any(v <= float(lo)) or np.any(v >= float(hi)):
                    return False
        return True

    def reduce(self, point: Mapping[str, object]) -> dict:
        out = dict(point)
        for c in self.coords:
            p = self.periods.get(c)
            if p is not None and c in out:
                out[c] = np.mod(out[c], float(p))
        return out

    def sample(self, n: int = DEFAULT_SAMPLES, seed: int = SAMPLE_SEED) -> dict:
        """Scrambled Halton points in the chart box, as name -> array."""
        eng = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        u = eng.random(n)
        u = 1e-9 + u * (1 - 2e-9)  # keep off the boundary of open intervals
        pts = {}
        for j, c in enumerate(self.coords):
            lo, hi = self.box(c)
            pts[c] = lo + u[:, j] * (hi - lo)
        return pts

    def env(self, point: Mapping[str, object]) -> dict:
        e = {k: float(v) for k, v in self.params.items()}
        e.update(point)
        return e

    def eval(self, exprs, point):
        """Evaluate Exprs at a point (dict of floats or arrays)."""
        return evaluate_many(exprs, self.env(point))

    # ------------------------------------------------------------ operators
    def Y(self, i: int, f: Expr) -> Expr:
        """Horizontal derivative Y_i f = df/dy^i + R_i^g df/dq^g."""
        out = diff(f, self.y[i])
        for g, qg in enumerate(self.q):
            rg = self.R[i][g]
            if not rg.is_zero:
                out = out + rg * diff(f, qg)
        return out

    @cached_property
    def omega_det(self) -> Expr:
        return _det([list(row) for row in self.omega])

    @cached_property
    def omega_inv(self):
        """Symbolic inverse of omega via the adjugate (2k <= 4)."""
        n = self.twok
        if n > 4:
            raise ChartError("symbolic inversion only supported for 2k <= 4")
        if n == 0:
            return ()
        m = [list(row) for row in self.omega]
        det = self.omega_det
        inv = []
        for i in range(n):
            row = []
            for j in range(n):
                minor = [[m[a][b] for b in range(n) if b != i] for a in range(n) if a != j]
                c = _det(minor) if minor else num(1)
                if (i + j) % 2:
                    c = -c
                row.append(c / det)
            inv.append(tuple(row))
        return tuple(inv)

    def omega_at(self, point) -> np.ndarray:
        n = self.twok
        flat = [self.omega[i][j] for i in range(n) for j in range(n)]
        vals = self.eval(flat, point)
        shape = np.broadcast(*[np.asarray(v) for v in vals] + [np.asarray(v, float) for v in point.values()]).shape
        return np.stack([np.broadcast_to(np.asarray(v, float), shape) for v in vals], axis=-1).reshape(shape + (n, n))

    def R_at(self, point) -> np.ndarray:
        flat = [self.R[i][a] for i in range(self.twok) for a in range(self.r)]
        vals = self.eval(flat, point)
        shape = np.broadcast(*[np.asarray(v) for v in vals] + [np.asarray(v, float) for v in point.values()]).shape
        return np.stack([np.broadcast_to(np.asarray(v, float), shape) for v in vals], axis=-1).reshape(shape + (self.twok, self.r))

    # ------------------------------------------------------------ (de)serialization
    def to_json(self) -> dict:
        doc = {
            "k": self.k,
            "r": self.r,
            "coords": {"y": list(self.y), "q": list(self.q)},
            "periods": {c: self.periods.get(c) for c in self.coords},
            "omega": [[str(e) for e in row] for row in self.omega],
            "R": [[str(e) for e in row] for row in self.R],
            "params": {k: f"{v.numerator}/{v.denominator}" for k, v in self.params.items()},
        }
        if self.bounds:
            doc["bounds"] = {k: [str(_frac(lo)), str(_frac(hi))] for k, (lo, hi) in self.bounds.items()}
        return doc

    def chart_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_R(self, R) -> "ChartSpec":
        return ChartSpec(self.k, self.r, self.y, self.q, self.omega, tuple(tuple(row) for row in R),
                         dict(self.periods), dict(self.params), dict(self.bounds), self.name)


def _det(m):
    n = len(m)
    if n == 0:
        return num(1)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    out = ZERO
    for j in range(n):
        if m[0][j].is_zero:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        out = out - term if j % 2 else out + term
    return out


# ---------------------------------------------------------------- validation

def validate(chart: ChartSpec, n: int = DEFAULT_SAMPLES, seed: int = SAMPLE_SEED, tol: float = 1e-12) -> ChartSpec:
    n2 = chart.twok
    if len(chart.omega) != n2 or any(len(row) != n2 for row in chart.omega):
        raise ChartError(f"omega must be {n2}x{n2}")
    if len(chart.R) != n2 or any(len(row) != chart.r for row in chart.R):
        raise ChartError(f"R must be {n2}x{chart.r}")
    known = set(chart.coords) | set(chart.params)
    for label, table in (("omega", chart.omega), ("R", chart.R)):
        for i, row in enumerate(table):
            for j, e in enumerate(row):
                unknown = free_symbols(e) - known
                if unknown:
                    raise ChartError(f"{label}[{i}][{j}] = {e}: unknown identifier(s) {sorted(unknown)}")
    for i in range(n2):
        for j in range(n2):
            bad = free_symbols(chart.omega[i][j]) & set(chart.q)
            if bad:
                raise ChartError(f"q-dependence: omega[{i}][{j}] = {chart.omega[i][j]} mentions {sorted(bad)}")
    pts = chart.sample(n, seed)

    def _first_bad(vals, thresh, larger=True):
        vals = np.broadcast_to(np.abs(np.asarray(vals, float)), (n,))
        idx = np.nonzero(vals > thresh if larger else vals <= thresh)[0]
        if idx.size == 0:
            return None
        a = idx[0]
        return {c: float(pts[c][a]) for c in chart.coords}, float(vals[a])

    for i in range(n2):
        for j in range(i, n2):
            (v,) = chart.eval([chart.omega[i][j] + chart.omega[j][i]], pts)
            hit = _first_bad(v, tol)
            if hit:
                raise ChartError(f"skew-symmetry: omega[{i}][{j}] + omega[{j}][{i}] = {hit[1]:.3e} at {hit[0]}")
    for a in range(n2):
        for b in range(a + 1, n2):
            for c in range(b + 1, n2):
                w = chart.omega
                cyc = (diff(w[b][c], chart.y[a]) + diff(w[c][a], chart.y[b]) + diff(w[a][b], chart.y[c]))
                (v,) = chart.eval([cyc], pts)
                hit = _first_bad(v, tol)
                if hit:
                    raise ChartError(f"closedness: d(omega) component ({a},{b},{c}) = {hit[1]:.3e} at {hit[0]}")
    if n2:
        (d,) = chart.eval([chart.omega_det], pts)
        hit = _first_bad(d, tol, larger=False)
        if hit:
            raise ChartError(f"degenerate omega: |det| = {hit[1]:.3e} at {hit[0]}")
    # every entry must evaluate to a finite number on the domain
    flat = [e for row in chart.R for e in row]
    if flat:
        vals = chart.eval(flat, pts)
        for e, v in zip(flat, vals):
            if not np.all(np.isfinite(v)):
                raise ChartError(f"R entry {e} is not finite on the domain")
    return chart


# ---------------------------------------------------------------- loading

def _schema():
    here = Path(__file__).resolve()
    for base in (here.parents[2] / "schemas", here.parent / "schemas"):
        f = base / "chart.schema.json"
        if f.exists():
            return json.loads(f.read_text())
    return None


def load_chart(document, n: int = DEFAULT_SAMPLES, seed: int = SAMPLE_SEED) -> ChartSpec:
    """Build and validate a chart from a JSON document, a JSON string or a path."""
    if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
        path = Path(document)
        if not path.exists():
            raise FileNotFoundError(f"chart file not found: {path}")
        document = json.loads(path.read_text())
    elif isinstance(document, str):
        document = json.loads(document)
    schema = _schema()
    if schema is not None:
        import jsonschema
        try:
            jsonschema.validate(document, schema)
        except jsonschema.ValidationError as exc:
            raise ChartError(f"schema violation: {exc.message}") from None
    k, r = int(document["k"]), int(document["r"])
    y = tuple(document["coords"]["y"])
    q = tuple(document["coords"]["q"])
    if len(y) != 2 * k or len(q) != r:
        raise ChartError("coordinate name lists do not match k and r")
    periods = {c: document.get("periods", {}).get(c) for c in y + q}
    params = {name: _frac(v) for name, v in document.get("params", {}).items()}
    bounds = {name: (_frac(lo), _frac(hi)) for name, (lo, hi) in document.get("bounds", {}).items()}
    try:
        omega = tuple(tuple(parse(s) for s in row) for row in document["omega"])
        R = tuple(tuple(parse(s) for s in row) for row in document["R"])
    except ValueError as exc:
        raise ChartError(f"bad expression: {exc}") from None
    chart = ChartSpec(k, r, y, q, omega, R, periods, params, bounds, document.get("name", "chart"))
    return validate(chart, n, seed)


# ---------------------------------------------------------------- built-ins

def builtin_flat_torus() -> ChartSpec:
    y, q = ("y1", "y2"), ("q1", "q2")
    omega = ((num(0), num(1)), (num(-1), num(0)))
    R = ((num(0), num(0)), (num(0), num(0)))
    periods = {c: 1.0 for c in y + q}
    return ChartSpec(1, 2, y, q, omega, R, periods, {}, {}, "flat_torus")


def oscillator_H(alpha):
    """H1, H2 of the oscillator family as Exprs in y2 and the parameter alpha."""
    a, y2 = sym("alpha"), sym("y2")
    H1 = (1 / (a - 1)) * ((2 * a - 1) / num(4) - a * y2)
    H2 = (1 / (a - 1)) * (y2 - num(1) / 4)
    return H1, H2


def builtin_oscillator(alpha=Fraction(3, 2)) -> ChartSpec:
    alpha = _frac(alpha)
    if alpha <= 1:
        raise ChartError("alpha must be > 1")
    a = sym("alpha")
    H1, H2 = oscillator_H(alpha)
    w12 = 1 / (2 * (a - 1))
    R22 = -a * (H1 - H2) / (a ** 2 * H2 + H1)
    y, q = ("y1", "y2"), ("q1", "q2")
    omega = ((num(0), w12), (-w12, num(0)))
    R = ((num(0), num(0)), (num(0), R22))
    periods = {"y1": 1.0, "y2": None, "q1": 1.0, "q2": 1.0}
    bounds = {"y2": (Fraction(1, 4), (2 * alpha - 1) / (4 * alpha))}
    return ChartSpec(1, 2, y, q, omega, R, periods, {"alpha": alpha}, bounds, f"oscillator_{alpha}")


def exact_entry(chart: ChartSpec, e: Expr) -> Expr:
    """Substitute the parameter values; constant entries fold to exact rationals."""
    return substitute(e, {k: num(v) for k, v in chart.params.items()})


def omega_inverse_at(chart: ChartSpec, point) -> np.ndarray:
    """Numeric inverse of omega at a point (standard matrix inverse)."""
    w = chart.omega_at(point)
    d = np.linalg.det(w)
    if np.any(np.abs(d) < 1e-14):
        raise ChartError("omega is singular at the requested point")
    return np.linalg.inv(w)
