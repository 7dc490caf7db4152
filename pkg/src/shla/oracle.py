"""Independent numeric checks in the symplectic thickening U of the zero section.

Coordinates on U are (y, q, p) with p_a dual to the frame f*_a. Everything
here is plain linear algebra at points plus finite differences, so it can be
used to audit the symbolic L-infinity machinery. The 2-form

    w_U = 1/2 (w_ij + p_b F^b_ij) dy^i ^ dy^j - (dp_d + p_b dR_i^b/dq^d dy^i) ^ (dq^d - R_j^d dy^j)

equals pi^* w - d theta_G with theta_G = p_b (dq^b - R_i^b dy^i); see docs/signs.md
for the sign of the curvature term.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chart import ChartSpec
from .expr import diff
from .foliation import transverse_curvature
from .forms import LeafForm, d_F, nabla

DET_TOL = 1e-10
FD_STEP = 1e-4


class InvalidPoint(ValueError):
    pass


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------- numeric chart data

class ChartNumerics:
    """Vectorized evaluation of omega, R, dR/dq and F at arrays of points."""

    def __init__(self, chart: ChartSpec):
        self.chart = chart
        n, r = chart.twok, chart.r
        F = transverse_curvature(chart)
        self._F_idx = F.indices()
        self._exprs = ([chart.omega[i][j] for i in range(n) for j in range(n)]
                       + [chart.R[i][a] for i in range(n) for a in range(r)]
                       + [diff(chart.R[i][b], chart.q[d]) for i in range(n) for b in range(r) for d in range(r)]
                       + [e for I in self._F_idx for e in F.value(I)])

    def at(self, point):
        ch = self.chart
        n, r = ch.twok, ch.r
        vals = ch.eval(self._exprs, point)
        npts = np.broadcast(*[np.asarray(v) for v in vals] + [np.asarray(next(iter(point.values())))]).shape
        npts = npts[0] if npts else 1
        arr = np.stack([np.broadcast_to(np.asarray(v, float), (npts,)) for v in vals], axis=-1)
        o = 0
        w = arr[:, o:o + n * n].reshape(npts, n, n); o += n * n
        R = arr[:, o:o + n * r].reshape(npts, n, r); o += n * r
        dR = arr[:, o:o + n * r * r].reshape(npts, n, r, r); o += n * r * r    # [i, b, d] = dR_i^b/dq^d
        Fv = arr[:, o:].reshape(npts, len(self._F_idx), r)
        F = np.zeros((npts, n, n, r))
        for p, (i, j) in enumerate(self._F_idx):
            F[:, i, j] = Fv[:, p]
            F[:, j, i] = -Fv[:, p]
        return w, R, dR, F


@dataclass
class ThickenedPoint:
    y: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def as_point(self, chart):
        pt = {c: np.atleast_1d(self.y[..., i]) for i, c in enumerate(chart.y)}
        pt.update({c: np.atleast_1d(self.q[..., a]) for a, c in enumerate(chart.q)})
        return pt


def _omega_U_from(w, R, dR, F, p):
    """Matrices of w_U, shape (npts, 2n, 2n), in the basis (dy, dq, dp)."""
    npts, n, r = R.shape
    D = n + 2 * r
    W = np.zeros((npts, D, D))
    W[:, :n, :n] = w + np.einsum("pijb,pb->pij", F, p)
    for d in range(r):
        A = np.zeros((npts, D))
        B = np.zeros((npts, D))
        A[:, n + r + d] = 1.0
        A[:, :n] = np.einsum("pb,pib->pi", p, dR[:, :, :, d])
        B[:, n + d] = 1.0
        B[:, :n] = -R[:, :, d]
        W -= np.einsum("pa,pb->pab", A, B) - np.einsum("pa,pb->pab", B, A)
    return W


def omega_U_at(chart: ChartSpec, tp: ThickenedPoint, numerics: ChartNumerics | None = None) -> np.ndarray:
    num = numerics or ChartNumerics(chart)
    w, R, dR, F = num.at(tp.as_point(chart))
    p = np.atleast_2d(tp.p)
    wt = w + np.einsum("pijb,pb->pij", F, p)
    det = np.abs(np.linalg.det(wt)) if chart.twok else np.ones(len(p))
    if np.any(det <= DET_TOL):
        raise InvalidPoint(f"fiber point outside the validity radius (|det w~| = {det.min():.2e})")
    return _omega_U_from(w, R, dR, F, p)


def theta_G_at(chart, tp: ThickenedPoint, numerics=None):
    """Components of theta_G = p_b (dq^b - R_i^b dy^i) in the basis (dy, dq, dp)."""
    num = numerics or ChartNumerics(chart)
    _, R, _, _ = num.at(tp.as_point(chart))
    p = np.atleast_2d(tp.p)
    n, r = chart.twok, chart.r
    th = np.zeros((len(p), n + 2 * r))
    th[:, :n] = -np.einsum("pb,pib->pi", p, R)
    th[:, n:n + r] = p
    return th


# ---------------------------------------------------------------- finite differences

def fd_gradient(fn, X, h=FD_STEP):
    """d fn / dX by central differences with one Richardson step. fn maps (npts, D) -> (npts, ...)."""
    D = X.shape[1]
    cols = []
    for a in range(D):
        def cd(step):
            Xp = X.copy(); Xm = X.copy()
            Xp[:, a] += step; Xm[:, a] -= step
            return (fn(Xp) - fn(Xm)) / (2 * step)
        cols.append((4 * cd(h / 2) - cd(h)) / 3)
    return np.stack(cols, axis=-1)       # (npts, ..., D)


def fd_exterior_one(fn, X, h=FD_STEP):
    """d of a one-form given as fn: (npts, D) -> (npts, D); returns (npts, D, D) with [a, b] = d_a l_b - d_b l_a."""
    G = fd_gradient(fn, X, h)            # [p, b, a] = d_a l_b
    return np.swapaxes(G, 1, 2) - G


def fd_exterior_two(fn, X, h=FD_STEP):
    """d of a two-form fn: (npts, D) -> (npts, D, D); returns the max of |dW_abc| over a < b < c per point."""
    G = fd_gradient(fn, X, h)            # [p, b, c, a] = d_a W_bc
    D = X.shape[1]
    out = np.zeros(X.shape[0])
    for a, b, c in itertools.combinations(range(D), 3):
        t = G[:, b, c, a] + G[:, c, a, b] + G[:, a, b, c]
        out = np.maximum(out, np.abs(t))
    return out


def _split(chart, X):
    n, r = chart.twok, chart.r
    return ThickenedPoint(X[:, :n], X[:, n:n + r], X[:, n + r:])


def omega_U_closedness(chart: ChartSpec, X: np.ndarray) -> float:
    """Max |d w_U| by finite differences at full coordinates X (npts, 2n)."""
    num = ChartNumerics(chart)
    fn = lambda Z: omega_U_at(chart, _split(chart, Z), num)
    return float(np.max(fd_exterior_two(fn, X)))


def omega_U_minus_dtheta(chart: ChartSpec, X: np.ndarray) -> float:
    """Max |w_U - (pi^* w - d theta_G)|, with d theta_G by finite differences."""
    num = ChartNumerics(chart)
    W = omega_U_at(chart, _split(chart, X), num)
    dth = fd_exterior_one(lambda Z: theta_G_at(chart, _split(chart, Z), num), X)
    w, *_ = num.at(_split(chart, X).as_point(chart))
    n = chart.twok
    base = np.zeros_like(W)
    base[:, :n, :n] = w
    return float(np.max(np.abs(W - (base - dth))))


# ---------------------------------------------------------------- sections

class SectionNumerics:
    """Values and coordinate derivatives of a leafwise one-form s = s_a f*^a."""

    def __init__(self, chart: ChartSpec, s: LeafForm):
        if s.degree != 1:
            raise ValueError("a section is a leafwise one-form")
        self.chart = chart
        self.s = s
        comps = [s[(a,)] for a in range(chart.r)]
        self._exprs = comps + [diff(e, c) for e in comps for c in chart.coords]

    def at(self, point):
        ch = self.chart
        r, m = ch.r, ch.dim
        vals = ch.eval(self._exprs, point)
        npts = len(np.atleast_1d(next(iter(point.values()))))
        arr = np.stack([np.broadcast_to(np.asarray(v, float), (npts,)) for v in vals], axis=-1)
        return arr[:, :r], arr[:, r:].reshape(npts, r, m)     # s, ds[a, coord]


def _coords_array(chart, points):
    return np.stack([np.atleast_1d(np.asarray(points[c], float)) for c in chart.coords], axis=-1)


def graph_frame(chart, s_val, ds):
    """Tangent frame of Graph(s): columns d/dx^c + ds_a/dx^c d/dp_a, shape (npts, 2n, n+k)."""
    npts = s_val.shape[0]
    m, r = chart.dim, chart.r
    T = np.zeros((npts, m + r, m))
    T[:, :m, :] = np.eye(m)
    T[:, m:, :] = ds
    return T


def graph_defect_at(chart: ChartSpec, s: LeafForm, points, numerics=None) -> np.ndarray:
    """Per-point norm of the part of (T Graph)^w outside T Graph."""
    num = numerics or ChartNumerics(chart)
    sv, ds = SectionNumerics(chart, s).at(points)
    X = _coords_array(chart, points)
    tp = ThickenedPoint(X[:, :chart.twok], X[:, chart.twok:], sv)
    W = omega_U_at(chart, tp, num)
    T = graph_frame(chart, sv, ds)
    out = np.empty(len(X))
    r = chart.r
    for p in range(len(X)):
        Q, sing, _ = np.linalg.svd(T[p], full_matrices=False)
        if sing[-1] < 1e-12 * max(1.0, sing[0]):
            raise InvalidPoint("graph frame is rank deficient")
        # (T)^w = ker(T^t W); its dimension is 2n - (n + k) = r
        _, _, Vt = np.linalg.svd(T[p].T @ W[p])
        N = Vt[-r:].T if r else np.zeros((W.shape[1], 0))
        out[p] = np.linalg.norm(N - Q @ (Q.T @ N), 2) if r else 0.0
    return out


def graph_coisotropy_defect(chart: ChartSpec, s: LeafForm, points=None) -> float:
    points = chart.sample() if points is None else points
    return float(np.max(graph_defect_at(chart, s, points)))


def master_operator(chart: ChartSpec, s: LeafForm, points, numerics=None) -> np.ndarray:
    """M(s) = d_F s - 1/2 sum_ij (w~^-1)_ij nabla_i s ^ nabla_j s with w~ = w + s.F (coefficients, npts x C(r,2))."""
    num = numerics or ChartNumerics(chart)
    n, r = chart.twok, chart.r
    pairs = list(itertools.combinations(range(r), 2))
    w, _, _, F = num.at(points)
    sv = np.stack([np.broadcast_to(np.asarray(v, float), (w.shape[0],))
                   for v in chart.eval([s[(a,)] for a in range(r)], points)], axis=-1) if r else np.zeros((w.shape[0], 0))
    wt = w + np.einsum("pijb,pb->pij", F, sv)
    if n:
        det = np.abs(np.linalg.det(wt))
        if np.any(det <= DET_TOL):
            raise InvalidPoint(f"w~ is singular along the section (|det| = {det.min():.2e})")
    winv = np.linalg.inv(wt) if n else wt
    nab = np.stack([nabla(chart, s, i).evaluate(chart, points) for i in range(n)], axis=1) if n else None
    lin = d_F(chart, s, strict=False).evaluate(chart, points)
    quad = np.zeros_like(lin)
    for c, (a, b) in enumerate(pairs):
        if n:
            quad[:, c] = (np.einsum("pi,pij,pj->p", nab[:, :, a], winv, nab[:, :, b])
                          - np.einsum("pi,pij,pj->p", nab[:, :, b], winv, nab[:, :, a]))
    return lin - 0.5 * quad


def master_residual(chart: ChartSpec, s: LeafForm, points=None) -> float:
    points = chart.sample() if points is None else points
    M = master_operator(chart, s, points)
    return float(np.max(np.abs(M), initial=0.0))


def validity_radius(chart: ChartSpec, s: LeafForm, points=None, rho_max: float = 10.0, steps: int = 200) -> float:
    """Largest rho (on a grid up to rho_max) with |det(w + t s.F)| > DET_TOL for all t <= rho."""
    points = chart.sample() if points is None else points
    num = ChartNumerics(chart)
    w, _, _, F = num.at(points)
    sv = np.stack([np.broadcast_to(np.asarray(v, float), (w.shape[0],))
                   for v in chart.eval([s[(a,)] for a in range(chart.r)], points)], axis=-1)
    sF = np.einsum("pijb,pb->pij", F, sv)
    last = 0.0
    for t in np.linspace(0, rho_max, steps + 1)[1:]:
        if np.any(np.abs(np.linalg.det(w + t * sF)) <= DET_TOL):
            return last
        last = t
    return last


# ---------------------------------------------------------------- pullback identities

def theta_pullback_check(chart: ChartSpec, s: LeafForm, points=None, h: float = FD_STEP):
    """Return (a, b): defects of s^* theta_G = p_G^* s and s^* w_U = w - d(p_G^* s)."""
    points = chart.sample() if points is None else points
    num = ChartNumerics(chart)
    secn = SectionNumerics(chart, s)
    n, r = chart.twok, chart.r

    def graph_data(X):
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        sv, ds = secn.at(pt)
        tp = ThickenedPoint(X[:, :n], X[:, n:], sv)
        return pt, sv, ds, tp

    def pG_s(X):
        # p_G^* s = s_b (dq^b - R_i^b dy^i) in the basis (dy, dq)
        pt, sv, _, _ = graph_data(X)
        _, R, _, _ = num.at(pt)
        out = np.zeros((X.shape[0], n + r))
        out[:, :n] = -np.einsum("pb,pib->pi", sv, R)
        out[:, n:] = sv
        return out

    X = _coords_array(chart, points)
    pt, sv, ds, tp = graph_data(X)
    J = graph_frame(chart, sv, ds)                      # d(graph map), (npts, 2n, n+k)
    th = theta_G_at(chart, tp, num)
    pulled = np.einsum("pa,pac->pc", th, J)
    a = float(np.max(np.abs(pulled - pG_s(X))))

    W = omega_U_at(chart, tp, num)
    lhs = np.einsum("pac,pab,pbd->pcd", J, W, J)
    w, *_ = num.at(pt)
    rhs = -fd_exterior_one(pG_s, X, h)
    rhs[:, :n, :n] += w
    b = float(np.max(np.abs(lhs - rhs)))
    return a, b


# ---------------------------------------------------------------- flat pre-Hamiltonian extension

def extend_prehamiltonian_flat(chart: ChartSpec, xi, points=None, p_scale: float = 0.3, seed: int = 7,
                               h: float = FD_STEP):
    """Extend a vector field xi on Y (list of Exprs over chart.coords) to U; return (field, defect).

    Xi = xi^j e_j + X_f with e_j = d/dy^j + R_j^a d/dq^a - p_b dR_j^b/dq^v d/dp_v and f = p_a xi_E^a,
    xi_E = xi^q - R xi^y; X_f is defined by iota_{X_f} w_U = df. The defect is max |d iota_Xi w_U|
    (the Lie derivative of w_U along Xi) by finite differences.
    """
    points = chart.sample() if points is None else points
    n, r, m = chart.twok, chart.r, chart.dim
    xi = list(xi)
    if len(xi) != m:
        raise ValueError(f"xi needs {m} components")
    F = transverse_curvature(chart)
    if F.max_abs(chart, points) > 1e-12:
        raise PreconditionError("transverse curvature is not zero; only the flat extension is implemented")
    num = ChartNumerics(chart)
    X0 = _coords_array(chart, points)

    def xi_at(X):
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        return np.stack([np.broadcast_to(np.asarray(v, float), (X.shape[0],)) for v in chart.eval(xi, pt)], axis=-1)

    # d(iota_xi w) = 0 on Y, with w pulled back to Y (only the dy block)
    def contraction_Y(X):
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        w, *_ = num.at(pt)
        v = xi_at(X)
        out = np.zeros((X.shape[0], m))
        out[:, :n] = np.einsum("pi,pij->pj", v[:, :n], w)
        return out

    closed = float(np.max(np.abs(fd_exterior_one(contraction_Y, X0, h))))
    if closed > 1e-8:
        raise PreconditionError(f"xi is not locally pre-Hamiltonian (|d(iota_xi w)| = {closed:.2e})")

    rng = np.random.default_rng(seed)
    P0 = p_scale * (2 * rng.random((X0.shape[0], r)) - 1)
    Z0 = np.concatenate([X0, P0], axis=1)

    def f_of(Z):
        X, P = Z[:, :m], Z[:, m:]
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        _, R, _, _ = num.at(pt)
        v = xi_at(X)
        xiE = v[:, n:] - np.einsum("pj,pja->pa", v[:, :n], R)
        return np.sum(P * xiE, axis=1)

    def field(Z):
        X, P = Z[:, :m], Z[:, m:]
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        w, R, dR, Fm = num.at(pt)
        W = _omega_U_from(w, R, dR, Fm, P)
        v = xi_at(X)
        lift = np.zeros_like(Z)
        lift[:, :n] = v[:, :n]
        lift[:, n:m] = np.einsum("pj,pja->pa", v[:, :n], R)
        lift[:, m:] = -np.einsum("pj,pb,pjbv->pv", v[:, :n], P, dR)
        df = fd_gradient(f_of, Z, h)
        # iota_X W = df  <=>  W^t X = df  <=>  X = -W^-1 df
        Xf = -np.linalg.solve(W, df[..., None])[..., 0]
        return lift + Xf

    def contraction_U(Z):
        X, P = Z[:, :m], Z[:, m:]
        pt = {c: X[:, a] for a, c in enumerate(chart.coords)}
        W = _omega_U_from(*num.at(pt), P)
        return np.einsum("pa,pab->pb", field(Z), W)

    defect = float(np.max(np.abs(fd_exterior_one(contraction_U, Z0, h))))
    return field, defect


# ---------------------------------------------------------------- linear model

@dataclass
class GrassmannPoint:
    """C_A = {(z, u, A_H z + A_I u)} in R^2k (+) R^(n-k) (+) R^(n-k), w = J (+) du ^ dv."""
    n: int
    k: int
    A_H: np.ndarray       # (n-k) x 2k
    A_I: np.ndarray       # (n-k) x (n-k)

    def __post_init__(self):
        self.A_H = np.asarray(self.A_H, float).reshape(self.n - self.k, 2 * self.k)
        self.A_I = np.asarray(self.A_I, float).reshape(self.n - self.k, self.n - self.k)
        if not 0 <= self.k <= self.n:
            raise ValueError("need 0 <= k <= n")


def darboux_matrix(k):
    J = np.zeros((2 * k, 2 * k))
    for i in range(k):
        J[2 * i, 2 * i + 1] = 1.0
        J[2 * i + 1, 2 * i] = -1.0
    return J


def linear_omega(n, k):
    m = n - k
    W = np.zeros((2 * n, 2 * n))
    W[:2 * k, :2 * k] = darboux_matrix(k)
    W[2 * k:2 * k + m, 2 * k + m:] = np.eye(m)
    W[2 * k + m:, 2 * k:2 * k + m] = -np.eye(m)
    return W


def grassmann_defect(gp: GrassmannPoint) -> float:
    """Frobenius norm of A_I - A_I^t + A_H J^-1 A_H^t."""
    if gp.k == 0:
        M = gp.A_I - gp.A_I.T
    else:
        M = gp.A_I - gp.A_I.T + gp.A_H @ np.linalg.inv(darboux_matrix(gp.k)) @ gp.A_H.T
    return float(np.linalg.norm(M))


def grassmann_is_coisotropic(gp: GrassmannPoint, tol: float = 1e-10):
    d = grassmann_defect(gp)
    return d < tol, d


def grassmann_basis(gp: GrassmannPoint) -> np.ndarray:
    """Columns spanning C_A, shape (2n, n+k)."""
    n, k = gp.n, gp.k
    m = n - k
    B = np.zeros((2 * n, 2 * k + m))
    B[:2 * k, :2 * k] = np.eye(2 * k)
    B[2 * k:2 * k + m, 2 * k:] = np.eye(m)
    B[2 * k + m:, :2 * k] = gp.A_H
    B[2 * k + m:, 2 * k:] = gp.A_I
    return B


def grassmann_brute_force(gp: GrassmannPoint, tol: float = 1e-8):
    """Compute C^w by SVD and test containment in C; returns (bool, defect)."""
    B = grassmann_basis(gp)
    W = linear_omega(gp.n, gp.k)
    m = gp.n - gp.k
    if m == 0:
        return True, 0.0
    _, _, Vt = np.linalg.svd(B.T @ W)
    N = Vt[-m:].T
    Q, _ = np.linalg.qr(B)
    d = float(np.linalg.norm(N - Q @ (Q.T @ N)))
    return d < tol, d


def random_grassmann_point(n, k, rng, coisotropic: bool | None = None, scale: float = 1.0) -> GrassmannPoint:
    m = n - k
    if coisotropic is None:
        coisotropic = bool(rng.random() < 0.5)
    A_H = scale * rng.standard_normal((m, 2 * k))
    if coisotropic:
        S = rng.standard_normal((m, m))
        S = S + S.T
        X = A_H @ np.linalg.inv(darboux_matrix(k)) @ A_H.T if k else np.zeros((m, m))
        A_I = scale * S - 0.5 * X
    else:
        A_I = scale * rng.standard_normal((m, m))
    return GrassmannPoint(n, k, A_H, A_I)


def grassmann_dimension(n: int, k: int) -> int:
    """Dimension of the coisotropic Grassmannian; the closed formula is checked against a rank count."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    formula = (n + 3 * k + 1) * (n - k) // 2
    m = n - k
    nvar = 2 * k * m + m * m
    # linearization at A = 0: (A_H, A_I) -> A_I - A_I^t (the quadratic term drops)
    L = np.zeros((m * m, nvar))
    for c in range(m * m):
        E = np.zeros((m, m))
        E.flat[c] = 1.0
        L[:, 2 * k * m + c] = (E - E.T).ravel()
    count = nvar - (np.linalg.matrix_rank(L) if nvar else 0)
    if count != formula:
        raise ArithmeticError(f"dimension formula {formula} disagrees with the linearization count {count}")
    return formula
