"""Gamma_2 calculus for separable functions on warped products.

``gamma2_terms`` evaluates the five-term splitting of Gamma_2 for
u = u1 (x) u2 tested against phi = p (x) q, using the one-dimensional
finite-volume operators of base and fiber and the discrete carre du
champ Gamma(a, b) = (L(ab) - a Lb - b La) / 2.  ``direct_gamma2`` is an
independent oracle that differentiates the full product-grid array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegeneratePoint, NeedsSmoothness, NonSeparable, SupportViolation
from .fiber import fiber_operator
from .geometry import WarpedProduct, height_distance
from .schrodinger import assemble
from .warp import WarpFunction

TERM_NAMES = ("base_gamma2", "fiber_gamma2_over_f4", "cross_drift", "fsharp_term", "quotient_gradient_term")


@dataclass(frozen=True, eq=False)
class TensorFunction:
    """u(r, x) = u1(r) u2(x) with vectorised factors."""

    u1: Callable
    u2: Callable

    @classmethod
    def from_samples(cls, rgrid, u1, xgrid, u2, periodic=False):
        """Cubic-spline factors through sampled values; both must be smooth on their grids."""
        for g, v in ((rgrid, u1), (xgrid, u2)):
            _check_smooth(np.asarray(g, float), np.asarray(v, float))
        s1 = CubicSpline(rgrid, u1)
        s2 = CubicSpline(xgrid, u2, bc_type="periodic" if periodic else "not-a-knot")
        return cls(s1, s2)

    @classmethod
    def from_array(cls, rgrid, xgrid, U, rtol=1e-10, periodic=False):
        """Factor a product-grid array, raising NonSeparable if its rank exceeds one."""
        U = np.asarray(U, float)
        left, s, right = np.linalg.svd(U, full_matrices=False)
        if s.size > 1 and s[1] > rtol * s[0]:
            raise NonSeparable(f"second singular value {s[1]:.3g} exceeds {rtol:.1g} x first")
        return cls.from_samples(rgrid, left[:, 0] * s[0], xgrid, right[0], periodic=periodic)

    def __call__(self, r, x):
        return np.multiply.outer(np.asarray(self.u1(r), float), np.asarray(self.u2(x), float))


def _check_smooth(grid, values):
    if grid.size < 4:
        return
    h = np.diff(grid)
    d1 = np.diff(values) / h
    d2 = np.diff(d1) / (0.5 * (h[1:] + h[:-1]))
    d3 = np.diff(d2)
    scale = np.max(np.abs(d2)) + np.max(np.abs(d1)) + np.max(np.abs(values)) + 1e-300
    if np.max(np.abs(d3)) > 0.5 * scale:
        raise NeedsSmoothness("sampled factor is not twice differentiable at grid scale")


def bump(center, width):
    """Smooth bump supported on [center - width, center + width]."""

    def p(x):
        s = (np.asarray(x, float) - center) / width
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    return p


def random_separable(W, rng, lo, hi):
    """Seeded low-frequency separable function, each factor scaled to sup norm 1."""
    w = math.pi / (hi - lo)
    F = W.F
    if F.kind == "circle":
        k, span, modes = 2 * math.pi / F.circumference, F.circumference, (np.cos, np.sin)
    else:
        k, span, modes = math.pi / F.length, F.length, (np.cos, lambda s: np.cos(2 * s))
    c = rng.normal(size=4)
    d = rng.normal(size=3)

    def raw1(r):
        r = np.asarray(r, float)
        return c[0] + c[1] * np.cos(w * r) + c[2] * np.sin(w * r) + c[3] * np.cos(2 * w * r)

    def raw2(x):
        x = k * np.asarray(x, float)
        return d[0] + d[1] * modes[0](x) + d[2] * modes[1](x)

    s1 = np.max(np.abs(raw1(np.linspace(lo, hi, 1001))))
    s2 = np.max(np.abs(raw2(np.linspace(0, span, 1001))))
    return TensorFunction(lambda r: raw1(r) / s1, lambda x: raw2(x) / s2)


def window_weight(W, center, width):
    """Nonnegative separable phi: a base bump times a positive fiber profile."""
    F = W.F
    if F.kind == "circle":
        k = 2 * math.pi / F.circumference
        q = lambda x: 1.0 + 0.5 * np.cos(k * np.asarray(x, float))
    else:
        q = bump(F.length / 2, 0.4 * F.length)
    return TensorFunction(bump(center, width), q)


# one-dimensional operator wrappers --------------------------------------

@dataclass(eq=False)
class _Op1D:
    x: np.ndarray
    mass: np.ndarray
    apply: Callable

    def gamma(self, a, b):
        return 0.5 * (self.apply(a * b) - a * self.apply(b) - b * self.apply(a))

    def gamma2_weak(self, a, p):
        """sum mass [Gamma(a) Lp / 2 - Gamma(a, La) p]."""
        La = self.apply(a)
        return float(np.sum(self.mass * (0.5 * self.gamma(a, a) * self.apply(p) - self.gamma(a, La) * p)))


def base_operator(W: WarpedProduct, grid_n=400, truncation=5.0):
    op = assemble(W.B, W.f, W.N, 0.0, grid_n, truncation)
    return _Op1D(op.grid, op.mass, op.apply), op.h


def fiber_op(W: WarpedProduct, grid_n=400):
    x, mass, S = fiber_operator(W.F, grid_n)
    return _Op1D(x, mass, lambda v: -(S @ v) / mass)


def fsharp(f: WarpFunction, r, N):
    """f''/f + (N - 1) f'^2 / f^2."""
    fr = np.asarray(f(r), float)
    if np.any(fr <= 0):
        raise DegeneratePoint("f vanishes at the evaluation point")
    out = np.asarray(f.derivative(r, 2), float) / fr + (N - 1) * np.asarray(f.derivative(r), float) ** 2 / fr ** 2
    return out if out.ndim else float(out)


def dimension_identity(a, b, N):
    """Both sides of a^2 + b^2/N = (a + b)^2/(N + 1) + (b - N a)^2/((N + 1) N)."""
    if np.any(~(np.asarray(N) > 0)):
        raise ValueError("N must be positive")
    lhs = a * a + b * b / N
    rhs = (a + b) ** 2 / (N + 1) + (b - N * a) ** 2 / ((N + 1) * N)
    return lhs, rhs


@dataclass
class Gamma2Report:
    terms: dict
    total: float
    grad_sq: float
    lap_sq: float
    h: float
    be_lhs: float = math.nan
    be_rhs: float = math.nan
    margin: float = math.nan
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "terms": dict(self.terms), "total": self.total, "grad_sq": self.grad_sq,
            "lap_sq": self.lap_sq, "h": self.h, "be_lhs": self.be_lhs,
            "be_rhs": self.be_rhs, "margin": self.margin,
        }


def gamma2_terms(W: WarpedProduct, u: TensorFunction, phi: TensorFunction, grid_n=400, fiber_n=400,
                 truncation=5.0):
    """The five named contributions to Gamma_2(u; phi) and the two BE integrals."""
    if not isinstance(u, TensorFunction) or not isinstance(phi, TensorFunction):
        raise NonSeparable("gamma2_terms needs separable u and phi")
    Bop, h = base_operator(W, grid_n, truncation)
    Fop = fiber_op(W, fiber_n)
    r, x = Bop.x, Fop.x
    a, p = np.asarray(u.u1(r), float), np.asarray(phi.u1(r), float)
    b, q = np.asarray(u.u2(x), float), np.asarray(phi.u2(x), float)
    if np.any(p < 0) or np.any(q < 0):
        raise SupportViolation("phi must be nonnegative")
    f = np.asarray(W.f_at(r), float)
    N = W.N
    mB, mF = Bop.mass, Fop.mass  # mB = f^N h

    def IB(g, k=0):
        return float(np.sum(mB * g * f ** (-k)))

    def IF(g):
        return float(np.sum(mF * g))

    La, Lb = Bop.apply(a), Fop.apply(b)
    GFb = Fop.gamma(b, b)
    terms = {
        "base_gamma2": Bop.gamma2_weak(a, p) * IF(b * b * q),
        "fiber_gamma2_over_f4": IB(a * a * p, 4) * Fop.gamma2_weak(b, q),
        "cross_drift": 2 * IB(Bop.gamma(f, a) / f * a * p, 2) * IF(b * Lb * q),
        "fsharp_term": -IB(np.asarray(fsharp(W.f, r, N)) * a * a * p, 2) * IF(GFb * q),
        "quotient_gradient_term": 2 * IB(Bop.gamma(a / f, a / f) * p) * IF(GFb * q),
    }
    total = float(sum(terms.values()))
    grad_sq = IB(Bop.gamma(a, a) * p) * IF(b * b * q) + IB(a * a * p, 2) * IF(GFb * q)
    lap_sq = (IB(La * La * p) * IF(b * b * q) + 2 * IB(La * a * p, 2) * IF(b * Lb * q)
              + IB(a * a * p, 4) * IF(Lb * Lb * q))
    return Gamma2Report(terms=terms, total=total, grad_sq=grad_sq, lap_sq=lap_sq, h=h)


def be_inequality(report: Gamma2Report, K, N, grad_sq_int=None, lap_sq_int=None):
    """BE(K N, N + 1) margin: Gamma_2 - K N int Gamma - int (Lu)^2 / (N + 1)."""
    g = report.grad_sq if grad_sq_int is None else grad_sq_int
    l2 = report.lap_sq if lap_sq_int is None else lap_sq_int
    rhs = K * N * g + l2 / (N + 1)
    report.be_lhs = report.total
    report.be_rhs = float(rhs)
    report.margin = float(report.total - rhs)
    return report.margin


def bochner_1d(W: WarpedProduct, u1, p, grid_n=400, truncation=5.0):
    """Gamma_2 of (B, f^N dr) for a base function, tested against p."""
    Bop, _ = base_operator(W, grid_n, truncation)
    return Bop.gamma2_weak(np.asarray(u1(Bop.x), float), np.asarray(p(Bop.x), float))


# direct oracle -----------------------------------------------------------

def _d(U, h, axis, periodic):
    if periodic:
        return (np.roll(U, -1, axis) - np.roll(U, 1, axis)) / (2 * h)
    return np.gradient(U, h, axis=axis, edge_order=2)


def direct_gamma2(W: WarpedProduct, U, phi, r, x):
    """Gamma_2(U; phi) = int (L Gamma(U) / 2 - Gamma(U, LU)) phi dm on a product grid.

    U and phi are full arrays on the uniform grid r x x; nothing about
    separability is used.  Returns (gamma2, grad_sq, lap_sq).
    """
    hr = float(r[1] - r[0])
    hx = float(x[1] - x[0])
    per = W.F.kind == "circle"
    f = np.asarray(W.f_at(r), float)[:, None]
    fp = np.asarray(W.df_at(r), float)[:, None]
    rho = W.F.density(x)[None, :]
    slope = (np.zeros_like(x) if per else W.F.log_density_slope(x))[None, :]
    N = W.N

    def Dr(V):
        return _d(V, hr, 0, False)

    def Dx(V):
        return _d(V, hx, 1, per)

    def L(V):
        Vr, Vx = Dr(V), Dx(V)
        return Dr(Vr) + N * fp / f * Vr + (Dx(Vx) + slope * Vx) / f ** 2

    def G(V, Y):
        return Dr(V) * Dr(Y) + Dx(V) * Dx(Y) / f ** 2

    LU = L(U)
    g2 = 0.5 * L(G(U, U)) - G(U, LU)
    dens = f ** N * rho * phi
    wr = np.full(r.size, hr)
    wr[[0, -1]] *= 0.5
    wx = np.full(x.size, hx)
    if not per:
        wx[[0, -1]] *= 0.5
    w = wr[:, None] * wx[None, :]

    def I(V):
        return float(np.sum(w * dens * V))

    return I(g2), I(G(U, U)), I(LU * LU)


def direct_for(W: WarpedProduct, u: TensorFunction, phi: TensorFunction, r, x):
    return direct_gamma2(W, u(r, x), phi(r, x), np.asarray(r, float), np.asarray(x, float))


# gradient comparison -----------------------------------------------------

def gradient_compare(W: WarpedProduct, u: TensorFunction, rpts, xpts, delta=1e-2, ndir=16, eps=1e-6):
    """min over points of |grad u|_*^2 - slope^2, the slope probed by distances on a stencil."""
    F = W.F
    if F.kind == "finite":
        raise SupportViolation("gradient comparison needs a 1D fiber")
    out = math.inf
    angles = 2 * math.pi * np.arange(ndir) / ndir
    for r in np.atleast_1d(rpts):
        fr = float(W.f_at(r))
        if fr <= 0:
            raise SupportViolation(f"u must be supported where f > 0 (f({r}) = 0)")
        for x in np.atleast_1d(xpts):
            u0 = float(u(r, x))
            ur = float((u(r + eps, x) - u(r - eps, x)) / (2 * eps))
            ux = float((u(r, x + eps) - u(r, x - eps)) / (2 * eps))
            star = ur * ur + ux * ux / (fr * fr)
            slope = 0.0
            for th in angles:
                r1 = r + delta * math.cos(th)
                x1 = x + delta * math.sin(th) / fr
                if not W.B.contains(r1):
                    continue
                if F.kind == "interval" and not 0 <= x1 <= F.length:
                    continue
                d = height_distance(W, r, r1, abs(F.arc_delta(x, x1)) if F.kind == "circle" else abs(x1 - x))
                if d > 0:
                    slope = max(slope, abs(float(u(r1, x1)) - u0) / d)
            out = min(out, star - slope * slope)
    return out
