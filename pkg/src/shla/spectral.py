"""Fourier backend on torus charts: transforms, spectral d_F and its inverse.

Modes are stored in fftshift order on a (2N+1)^dim grid, axes ordered as
chart.coords (y first, then q). Coefficients are normalized so that
f(x) = sum_m c_m exp(2 pi i m.x / P).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chart import ChartSpec
from .expr import PI, ZERO, cos, num, sin, sym
from .forms import LeafForm, _merge_sign

DEFAULT_N = 16
CHUNK = 1 << 15


class SpectralError(ValueError):
    pass


class NotClosed(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralForm:
    degree: int
    r: int
    N: int
    coords: tuple
    periods: tuple
    coeffs: dict      # increasing index tuple -> complex array, shape (2N+1,)*dim

    @property
    def shape(self):
        return (2 * self.N + 1,) * len(self.coords)

    def freqs(self):
        """Integer frequencies along one axis, fftshift order."""
        return np.arange(-self.N, self.N + 1)

    def wavenumbers(self, axis):
        k = self.freqs() / self.periods[axis]
        sh = [1] * len(self.coords)
        sh[axis] = -1
        return k.reshape(sh)

    def max_abs(self):
        return max((float(np.max(np.abs(c))) for c in self.coeffs.values()), default=0.0)

    def hermitian_defect(self):
        """|c_m - conj(c_-m)|, zero for a real form."""
        worst = 0.0
        for c in self.coeffs.values():
            flipped = np.conj(c[(slice(None, None, -1),) * c.ndim])
            worst = max(worst, float(np.max(np.abs(c - flipped))))
        return worst

    def __add__(self, other):
        out = {I: c.copy() for I, c in self.coeffs.items()}
        for I, c in other.coeffs.items():
            out[I] = out[I] + c if I in out else c.copy()
        return SpectralForm(self.degree, self.r, self.N, self.coords, self.periods, out)

    def scale(self, s):
        return SpectralForm(self.degree, self.r, self.N, self.coords, self.periods,
                            {I: s * c for I, c in self.coeffs.items()})

    def grid_values(self):
        """Values on the transform grid, keyed like coeffs."""
        n = np.prod(self.shape)
        return {I: np.real(np.fft.ifftn(np.fft.ifftshift(c)) * n) for I, c in self.coeffs.items()}

    def evaluate(self, point) -> dict:
        """Direct (non-FFT) evaluation at arbitrary points, keyed like coeffs."""
        xs = [np.atleast_1d(np.asarray(point[c], float)) for c in self.coords]
        out = {}
        for I, c in self.coeffs.items():
            idx = np.argwhere(np.abs(c) > 0)
            vals = np.zeros(xs[0].shape, complex)
            for m in idx:
                ph = sum(2j * np.pi * (int(m[a]) - self.N) * xs[a] / self.periods[a] for a in range(len(xs)))
                vals = vals + c[tuple(m)] * np.exp(ph)
            out[I] = vals.real
        return out


def _grid(chart: ChartSpec, N: int):
    axes = []
    for c in chart.coords:
        P = chart.period(c)
        if P is None:
            raise SpectralError(f"coordinate {c} is not periodic; spectral methods need a torus chart")
        axes.append(P * np.arange(2 * N + 1) / (2 * N + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return {c: m for c, m in zip(chart.coords, mesh)}


def to_spectral(chart: ChartSpec, xi: LeafForm, N: int = DEFAULT_N) -> SpectralForm:
    if not chart.is_torus:
        raise SpectralError("spectral transform needs every coordinate periodic")
    g = _grid(chart, N)
    shape = (2 * N + 1,) * chart.dim
    n = int(np.prod(shape))
    idx = [I for I in xi.coeffs]
    exprs = [xi.coeffs[I] for I in idx]
    flat = {c: v.ravel() for c, v in g.items()}
    vals = np.empty((len(idx), n))
    # chunked so that intermediate arrays of large expression DAGs stay small
    for lo in range(0, n, CHUNK):
        pt = {c: v[lo:lo + CHUNK] for c, v in flat.items()}
        for a, v in enumerate(chart.eval(exprs, pt)):
            vals[a, lo:lo + CHUNK] = v
    coeffs = {}
    for I, v in zip(idx, vals):
        coeffs[I] = np.fft.fftshift(np.fft.fftn(v.reshape(shape))) / n
    periods = tuple(float(chart.period(c)) for c in chart.coords)
    return SpectralForm(xi.degree, xi.r, N, tuple(chart.coords), periods, coeffs)


def _q_axes(chart: ChartSpec):
    return list(range(chart.twok, chart.dim))


def spectral_dF(chart: ChartSpec, s: SpectralForm) -> SpectralForm:
    """d_F in Fourier space: theta^b ^ (2 pi i k_b)."""
    out = {}
    qa = _q_axes(chart)
    for I, c in s.coeffs.items():
        for b, ax in enumerate(qa):
            if b in I:
                continue
            sg, K = _merge_sign((b,), I)
            t = (2j * np.pi * sg) * s.wavenumbers(ax) * c
            out[K] = out[K] + t if K in out else t
    return SpectralForm(s.degree + 1, s.r, s.N, s.coords, s.periods, out)


def q_zero_mode(chart: ChartSpec, s: SpectralForm) -> SpectralForm:
    """Keep only modes with zero q-frequency (the fiber average over the leaf torus)."""
    mask = np.ones(s.shape, bool)
    for ax in _q_axes(chart):
        sl = [None] * len(s.coords)
        sl[ax] = slice(None)
        mask = mask & (s.freqs() == 0)[tuple(sl)]
    return SpectralForm(s.degree, s.r, s.N, s.coords, s.periods, {I: np.where(mask, c, 0) for I, c in s.coeffs.items()})


def fiber_integral(chart: ChartSpec, s: SpectralForm) -> dict:
    """Leaf-fiber average of each component as a function on the y-grid (fiber volume normalized to 1)."""
    z = q_zero_mode(chart, s)
    ny = chart.twok
    out = {}
    for I, c in z.coeffs.items():
        sl = tuple([slice(None)] * ny + [s.N] * chart.r)
        cy = c[sl]
        n = (2 * s.N + 1) ** ny
        out[I] = np.real(np.fft.ifftn(np.fft.ifftshift(cy)) * n) if ny else np.real(cy)
    return out


def solve_dF(chart: ChartSpec, eta: SpectralForm, tol: float = 1e-10):
    """Solve d_F Gamma = -eta. Returns (Gamma, None) or (None, obstruction).

    The obstruction is the q-zero-mode part of eta; the primitive is the
    minimal one with zero q-zero-mode: Gamma_hat = -iota_k eta_hat / (2 pi i |k|^2).
    """
    if eta.degree < 1:
        raise ValueError("solve_dF needs a form of degree >= 1")
    if eta.degree < chart.r:
        d = spectral_dF(chart, eta)
        if d.max_abs() > tol:
            raise NotClosed(f"right-hand side is not d_F-closed (residual {d.max_abs():.3e})")
    z = q_zero_mode(chart, eta)
    if z.max_abs() > tol:
        return None, z
    qa = _q_axes(chart)
    ks = [eta.wavenumbers(ax) for ax in qa]
    k2 = sum(k ** 2 for k in ks)
    k2 = np.broadcast_to(k2, eta.shape)
    safe = np.where(k2 == 0, 1.0, k2)
    out = {}
    for I, c in eta.coeffs.items():
        for pos, b in enumerate(I):
            J = I[:pos] + I[pos + 1:]
            t = (-1) ** pos * ks[b] * c
            out[J] = out[J] + t if J in out else t
    for J in out:
        out[J] = np.where(k2 == 0, 0, -out[J] / (2j * np.pi * safe))
    return SpectralForm(eta.degree - 1, eta.r, eta.N, eta.coords, eta.periods, out), None


def to_leafform(s: SpectralForm, tol: float = 1e-13) -> LeafForm:
    """Real trigonometric polynomial with the same modes (coefficients rounded to rationals)."""
    coeffs = {}
    N = s.N
    for I, c in s.coeffs.items():
        e = ZERO
        for m in np.argwhere(np.abs(c) > tol):
            freq = [int(v) - N for v in m]
            lead = next((f for f in freq if f), 0)
            if lead < 0:
                continue        # paired with its conjugate mode
            val = c[tuple(m)]
            if lead == 0:
                e = e + num(float(val.real))
                continue
            arg = ZERO
            for f, name, P in zip(freq, s.coords, s.periods):
                if f:
                    arg = arg + num(Fraction(f) / Fraction(P).limit_denominator(10**6)) * sym(name)
            # c e^{i t} + conj(c) e^{-i t} = 2 Re c cos t - 2 Im c sin t
            if abs(val.real) > tol:
                e = e + num(2 * float(val.real)) * cos(2 * PI * arg)
            if abs(val.imag) > tol:
                e = e + num(-2 * float(val.imag)) * sin(2 * PI * arg)
        if not e.is_zero:
            coeffs[I] = e
    return LeafForm(s.degree, s.r, coeffs)
