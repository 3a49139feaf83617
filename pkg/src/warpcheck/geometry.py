"""Warped products B x_f F over one-dimensional bases.

Distances reduce to the two-dimensional problem on B x_f [0, L] with
L = d_F(x, y).  Geodesics of that surface are found by shooting on the
geodesic equations; an independent oracle minimises the discrete length
functional starting from a grid Dijkstra path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage, optimize
from scipy.integrate import solve_ivp

from . import _fastgeo
from .errors import (
    EmptySet,
    NotApplicable,
    PartitionMismatch,
    ShootingDiverged,
    SupportViolation,
)
from .fiber import FiberSpace, fiber_distance
from .kernel import tau
from .warp import BaseSpace, WarpFunction

ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WarpedProduct:
    """The triple (B, f, F) with dimension parameter N and measure f^N vol_B x m_F."""

    B: BaseSpace
    f: WarpFunction
    N: float
    F: FiberSpace

    def __post_init__(self):
        if not self.N >= 1:
            raise ValueError("N must be >= 1")

    @property
    def K(self):
        return self.f.K

    def f_at(self, r):
        if self.B.kind == "circle":
            r = np.mod(r, self.B.period)
        return np.asarray(self.f(r), float)

    def df_at(self, r):
        if self.B.kind == "circle":
            r = np.mod(r, self.B.period)
        return np.asarray(self.f.derivative(r), float)

    def density(self, r):
        return np.maximum(self.f_at(r), 0.0) ** self.N

    @property
    def bounds(self):
        if self.B.kind == "circle":
            return -math.inf, math.inf
        return self.B.a, self.B.b

    def zeros(self, lo=None, hi=None, R=5.0):
        """Base points in [lo, hi] where f vanishes."""
        wlo, whi = self.B.window(R)
        if self.B.kind != "circle":
            wlo, whi = max(wlo, self.B.a), min(whi, self.B.b)
        lo = wlo if lo is None else lo
        hi = whi if hi is None else hi
        f = self.f
        pts = []
        analytic = f.is_catalog and f.params[0] != 0 and f.name in ("sin", "id")
        if analytic:
            _, rate, shift = f.params
            if f.name == "sin":
                step = math.pi / abs(rate)
                k0 = math.ceil((lo - shift) / step - 1e-12)
                k1 = math.floor((hi - shift) / step + 1e-12)
                pts = [shift + k * step for k in range(k0, k1 + 1)]
            else:
                pts = [shift] if lo - 1e-12 <= shift <= hi + 1e-12 else []
        else:
            x = np.linspace(lo, hi, 4097) if np.isfinite(hi - lo) else np.array([])
            if x.size:
                v = self.f_at(x)
                hit = np.flatnonzero(v <= ZERO_TOL)
                pts = [float(x[i]) for i in hit]
                sign = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
                for i in sign:
                    pts.append(float(optimize.brentq(lambda s: float(self.f_at(s)), x[i], x[i + 1])))
        pts = [min(max(p, self.bounds[0]), self.bounds[1]) for p in pts]
        return np.array(sorted(set(pts)), float)

    def is_degenerate(self, r):
        return float(self.f_at(r)) <= ZERO_TOL

    def canonical(self, p):
        """Representative of p under the identification of fibers over zeros of f."""
        r, x = p
        if self.B.kind == "circle":
            r = float(np.mod(r, self.B.period))
        if self.is_degenerate(r):
            return (float(r), None)
        return (float(r), x)

    def base_measure(self, lo, hi, n=64):
        """Integral of f^N over [lo, hi] by Gauss-Legendre."""
        if hi <= lo:
            return 0.0
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        return float(0.5 * (hi - lo) * np.sum(w * self.density(r)))

    def to_dict(self):
        return {"base": self.B.to_dict(), "warp": self.f.to_dict(), "K": self.K, "N": self.N}


# length functional ------------------------------------------------------

def path_length(W: WarpedProduct, alpha, beta):
    """Length of (alpha, beta) sampled on a common partition.

    ``beta`` is given as fiber arclength.  Each segment contributes the
    trapezoid average of sqrt(dr^2 + f^2 dz^2) at its two ends.
    """
    alpha = np.asarray(alpha, float)
    beta = np.asarray(beta, float)
    if alpha.shape != beta.shape or alpha.ndim != 1:
        raise PartitionMismatch(f"alpha has shape {alpha.shape}, beta has shape {beta.shape}")
    if alpha.size < 2:
        return 0.0
    dr = np.diff(alpha)
    dz = np.diff(beta)
    fa = W.f_at(alpha)
    la = np.sqrt(dr ** 2 + (fa[:-1] * dz) ** 2)
    lb = np.sqrt(dr ** 2 + (fa[1:] * dz) ** 2)
    return float(np.sum(0.5 * (la + lb)))


# shooting ----------------------------------------------------------------

@dataclass
class GeodesicPath:
    """A geodesic of B x_f [0, L] parametrised on t in [0, 1] with constant speed."""

    t: np.ndarray
    alpha: np.ndarray
    z: np.ndarray
    beta_arclength: float
    length: float
    c: float
    E: float
    clairaut_drift: float
    speed_drift: float
    mode: str = "smooth"
    smooth: bool = True
    extra: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r", "fiber_arclength"])
            for row in zip(self.t, self.alpha, self.z):
                w.writerow([f"{v:.12g}" for v in row])

    def to_dict(self):
        return {
            "length": self.length,
            "beta_arclength": self.beta_arclength,
            "c": self.c,
            "E": self.E,
            "clairaut_drift": self.clairaut_drift,
            "speed_drift": self.speed_drift,
            "mode": self.mode,
            "smooth": self.smooth,
        }


def _geodesic_rhs(W):
    def rhs(s, y):
        r, z, dr, dz = y
        f = float(W.f_at(r))
        fp = float(W.df_at(r))
        return [dr, dz, f * fp * dz * dz, -2.0 * fp / f * dr * dz]

    return rhs


def _shoot(W, r0, phi, L, smax, lo, hi, rtol, dense=False):
    f0 = float(W.f_at(r0))
    y0 = [r0, 0.0, math.cos(phi), math.sin(phi) / f0]

    def hit(s, y):
        return y[1] - L

    hit.terminal, hit.direction = True, 1

    def floor(s, y):
        return float(W.f_at(y[0])) - 1e-9

    floor.terminal = True

    events = [hit, floor]
    if np.isfinite(lo):
        def left(s, y):
            return y[0] - lo

        left.terminal = True
        events.append(left)
    if np.isfinite(hi):
        def right(s, y):
            return hi - y[0]

        right.terminal = True
        events.append(right)
    sol = solve_ivp(
        _geodesic_rhs(W), (0.0, smax), y0, method="DOP853", events=events,
        rtol=rtol, atol=rtol * 1e-2, dense_output=dense,
    )
    if sol.t_events[0].size == 0:
        return math.nan, math.nan, sol
    s_end = float(sol.t_events[0][0])
    return float(sol.y_events[0][0][0]), s_end, sol


def _path_from_solution(W, sol, length, L, n):
    s = np.linspace(0.0, length, n)
    y = sol.sol(s)
    t = s / length if length > 0 else s
    r, z = y[0], np.clip(y[1], 0.0, L)
    rdot, zdot = y[2] * length, y[3] * length
    f2 = W.f_at(r) ** 2
    cl = f2 * zdot
    speed = rdot ** 2 + f2 * zdot ** 2
    c = float(np.mean(cl))
    cdrift = float(np.std(cl) / abs(c)) if c != 0 else float(np.max(np.abs(cl)))
    sdrift = float((speed.max() - speed.min()) / speed.mean())
    return GeodesicPath(
        t=t, alpha=r, z=z, beta_arclength=L, length=length, c=c,
        E=0.5 * length ** 2, clairaut_drift=cdrift, speed_drift=sdrift,
    )


def _shoot_lift(W, r0, r1, L, n, nscan, rtol):
    lo, hi = W.bounds
    f0, f1 = float(W.f_at(r0)), float(W.f_at(r1))
    bound = min(f0, f1) * L + abs(r1 - r0)
    smax = 3.0 * bound
    phis = 0.5 * math.pi * (1 - np.cos(math.pi * (np.arange(nscan) + 0.5) / nscan))
    vals = np.array([_shoot(W, r0, p, L, smax, lo, hi, 1e-9)[0] - r1 for p in phis])
    best = None
    for j in range(nscan - 1):
        va, vb = vals[j], vals[j + 1]
        if not (np.isfinite(va) and np.isfinite(vb)) or va * vb > 0:
            continue

        def g(p):
            rr = _shoot(W, r0, p, L, smax, lo, hi, rtol)[0]
            return rr - r1 if np.isfinite(rr) else (va if p < 0.5 * (phis[j] + phis[j + 1]) else vb)

        try:
            p = optimize.brentq(g, phis[j], phis[j + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        except ValueError:
            continue
        rr, s_end, sol = _shoot(W, r0, p, L, smax, lo, hi, rtol, dense=True)
        if not np.isfinite(rr) or abs(rr - r1) > 1e-8:
            continue
        if best is None or s_end < best[0]:
            best = (s_end, sol, p)
    if best is None:
        return None
    path = _path_from_solution(W, best[1], best[0], L, n)
    path.extra["phi0"] = float(best[2])
    return path


def _segment_path(W, r0, r1, L, n):
    t = np.linspace(0.0, 1.0, n)
    length = abs(r1 - r0)
    return GeodesicPath(
        t=t, alpha=r0 + t * (r1 - r0), z=np.zeros(n), beta_arclength=L, length=length,
        c=0.0, E=0.5 * length ** 2, clairaut_drift=0.0, speed_drift=0.0, mode="segment",
    )


def _lifts(W, r0, r1):
    if W.B.kind != "circle":
        return [r1]
    P = W.B.period
    base = r0 + math.remainder(r1 - r0, P)
    return [base, base - P, base + P]


def geodesic_2d(W: WarpedProduct, r0, r1, L, n=201, nscan=48, rtol=1e-12, fallback=True):
    """Shortest geodesic of B x_f [0, L] from (r0, 0) to (r1, L).

    If no shot lands on the target the grid oracle is used instead (when
    ``fallback``) and the result is flagged ``smooth=False``.
    """
    r0, r1, L = float(r0), float(r1), float(L)
    if L < 0:
        raise ValueError("L must be nonnegative")
    if L == 0:
        lifts = _lifts(W, r0, r1)
        return _segment_path(W, r0, min(lifts, key=lambda s: abs(s - r0)), L, n)
    if W.is_degenerate(r0) or W.is_degenerate(r1):
        raise ShootingDiverged("an endpoint lies over a zero of f; use distance()")
    best = None
    for s in _lifts(W, r0, r1):
        path = _shoot_lift(W, r0, s, L, n, nscan, rtol)
        if path is not None and (best is None or path.length < best.length):
            best = path
    if best is not None:
        return best
    if not fallback:
        raise ShootingDiverged(f"no geodesic found from r={r0} to r={r1} at height {L}")
    res = grid_geodesic(W, r0, r1, L)
    path = res.path(n)
    path.smooth = False
    path.mode = "grid"
    return path


# distance ----------------------------------------------------------------

def _fast_args(W):
    if not W.f.is_catalog:
        return None
    return (_fastgeo.KIND_CODES[W.f.name],) + tuple(float(v) for v in W.f.params)


def _zeros_for(W, r0, r1):
    R = max(abs(r0), abs(r1)) + 1.0
    if W.B.kind == "circle":
        return W.zeros(min(r0, r1) - W.B.period, max(r0, r1) + W.B.period, R=R)
    return W.zeros(R=R)


def _broken_length(W, r0, r1):
    zs = _zeros_for(W, r0, r1)
    if zs.size == 0:
        return math.inf
    return float(np.min(np.abs(r0 - zs) + np.abs(zs - r1)))


def height_distance(W: WarpedProduct, r0, r1, L, nscan=32, nsteps=400):
    """Distance between (r0, 0) and (r1, L) in B x_f [0, L]."""
    r0, r1, L = float(r0), float(r1), float(L)
    dB = float(W.B.distance(r0, r1))
    if L == 0 or W.is_degenerate(r0) or W.is_degenerate(r1):
        return dB
    broken = _broken_length(W, r0, r1)
    args = _fast_args(W)
    smooth = math.inf
    if args is not None:
        lo, hi = W.bounds
        for s in _lifts(W, r0, r1):
            length, _, ok = _fastgeo.shoot_pair(*args, min(r0, s), max(r0, s), L, lo, hi, nscan, nsteps)
            if ok:
                smooth = min(smooth, length)
    else:
        try:
            smooth = geodesic_2d(W, r0, r1, L, fallback=False).length
        except ShootingDiverged:
            pass
    if not np.isfinite(smooth) and not np.isfinite(broken):
        smooth = grid_geodesic(W, r0, r1, L).length
    return min(smooth, broken)


def distance(W: WarpedProduct, p0, p1):
    """Distance between points (r, x) of the warped product."""
    q0, q1 = W.canonical(p0), W.canonical(p1)
    if q0 == q1:
        return 0.0
    r0, x0 = q0
    r1, x1 = q1
    L = 0.0 if x0 is None or x1 is None else fiber_distance(W.F, x0, x1)
    return height_distance(W, r0, r1, L)


def _fiber_step(F: FiberSpace, x, y, s):
    """Point at fiber arclength s along the fiber geodesic from x towards y."""
    if F.kind == "finite":
        if s <= 0:
            return x
        if s >= F.distances[x, y]:
            return y
        raise NotApplicable("finite fibers have no interior geodesic points")
    d = F.arc_delta(x, y)
    out = x + math.copysign(s, d)
    if F.kind == "circle":
        out = math.fmod(out, F.circumference)
        if out < 0:
            out += F.circumference
    return out


def midpoint(W: WarpedProduct, p0, p1, t):
    """The point at parameter t along a shortest path from p0 to p1."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return p0
    if t == 1.0:
        return p1
    (r0, x0), (r1, x1) = W.canonical(p0), W.canonical(p1)
    if x0 is None or x1 is None:
        x = x1 if x0 is None else x0
        rt = r0 + t * float(W.B.distance(r0, r1)) * (1 if _lifts(W, r0, r1)[0] >= r0 else -1)
        return (_wrap_base(W, rt), x)
    L = fiber_distance(W.F, x0, x1)
    args = _fast_args(W)
    if args is not None:
        lo, hi = W.bounds
        best = None
        for s in _lifts(W, r0, r1):
            zs = _zeros_for(W, r0, s)
            rt, zt, length, mode = _fastgeo.pair_point(*args, r0, s, L, t, lo, hi, zs, 32, 400)
            if mode >= 0 and (best is None or length < best[2]):
                best = (rt, zt, length)
        if best is None:
            raise ShootingDiverged("no shortest path found")
        rt, zt = best[0], best[1]
    else:
        broken = _broken_length(W, r0, r1)
        path = geodesic_2d(W, r0, r1, L)
        if broken < path.length:
            zs = _zeros_for(W, r0, r1)
            zb = zs[np.argmin(np.abs(r0 - zs) + np.abs(zs - r1))]
            s = t * broken
            if s <= abs(zb - r0):
                rt, zt = r0 + math.copysign(s, zb - r0), 0.0
            else:
                rt, zt = zb + math.copysign(s - abs(zb - r0), r1 - zb), L
        else:
            rt = float(np.interp(t, path.t, path.alpha))
            zt = float(np.interp(t, path.t, path.z))
    return (_wrap_base(W, rt), _fiber_step(W.F, x0, x1, zt))


def _wrap_base(W, r):
    if W.B.kind == "circle":
        return float(np.mod(r, W.B.period))
    return float(r)


# grid oracle -------------------------------------------------------------

@dataclass
class GridGeodesic:
    """Oracle result: Dijkstra length and relaxed polylines at M and 2M vertices."""

    dijkstra_length: float
    lengths: tuple
    length: float
    vertices: np.ndarray
    L: float
    grid_shape: tuple

    def path(self, n=201):
        v = self.vertices
        seg = np.hypot(np.diff(v[:, 0]), np.diff(v[:, 1]))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        s = s / s[-1] if s[-1] > 0 else np.linspace(0, 1, len(s))
        t = np.linspace(0.0, 1.0, n)
        r = np.interp(t, s, v[:, 0])
        z = np.interp(t, s, v[:, 1])
        return GeodesicPath(
            t=t, alpha=r, z=z, beta_arclength=self.L, length=self.length, c=math.nan,
            E=0.5 * self.length ** 2, clairaut_drift=math.nan, speed_drift=math.nan,
            mode="grid", smooth=False,
        )


def _grid_window(W, r0, r1, L, n):
    lo_b, hi_b = W.bounds
    e = 0.5 * min(float(W.f_at(r0)), float(W.f_at(r1))) * L
    lo, hi = min(r0, r1), max(r0, r1)
    span = (hi - lo) + 2 * e
    if span == 0:
        span = 1.0
    h = span / (n - 1)
    if hi > lo:
        h = (hi - lo) / max(1, round((hi - lo) / h))
    below = math.ceil(e / h - 1e-9)
    if np.isfinite(lo_b):
        below = min(below, math.floor((lo - lo_b) / h + 1e-9))
    above = math.ceil(e / h - 1e-9)
    if np.isfinite(hi_b):
        above = min(above, math.floor((hi_b - hi) / h + 1e-9))
    start = lo - below * h
    nr = below + round((hi - lo) / h) + above + 1
    return start, h, nr


def _seg_terms(W, P):
    r, z = P[:, 0], P[:, 1]
    dr, dz = np.diff(r), np.diff(z)
    xs = (r[:-1], 0.5 * (r[:-1] + r[1:]), r[1:])
    f = [W.f_at(x) for x in xs]
    fp = [W.df_at(x) for x in xs]
    ell = [np.sqrt(dr * dr + (fi * dz) ** 2 + 1e-300) for fi in f]
    S = (ell[0] + 4 * ell[1] + ell[2]) / 6.0
    return dr, dz, f, fp, ell, S


def _energy(flat, W, a, b, M, lo, hi):
    P = np.vstack([a, flat.reshape(M - 1, 2), b])
    dr, dz, f, fp, ell, S = _seg_terms(W, P)
    wts = (1.0, 4.0, 1.0)
    halves = ((1.0, 0.0), (0.5, 0.5), (0.0, 1.0))
    dS_ddr = sum(w * dr / l for w, l in zip(wts, ell)) / 6.0
    dS_ddz = sum(w * fi * fi * dz / l for w, fi, l in zip(wts, f, ell)) / 6.0
    dS_dx = [w * fi * fpi * dz * dz / l / 6.0 for w, fi, fpi, l in zip(wts, f, fp, ell)]
    coef = 2.0 * M * S
    J = M * float(np.sum(S * S))
    gr = np.zeros(M + 1)
    gz = np.zeros(M + 1)
    for sign, idx in ((-1.0, slice(None, -1)), (1.0, slice(1, None))):
        gr[idx] += coef * sign * dS_ddr
        gz[idx] += coef * sign * dS_ddz
    for (wa, wb), d in zip(halves, dS_dx):
        gr[:-1] += coef * wa * d
        gr[1:] += coef * wb * d
    g = np.column_stack([gr, gz])[1:-1].ravel()
    return J, g


def _relax(W, P, lo, hi):
    M = P.shape[0] - 1
    a, b = P[0], P[-1]
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None), (None, None)] * (M - 1)
    res = optimize.minimize(
        _energy, P[1:-1].ravel(), args=(W, a, b, M, lo, hi), jac=True, method="L-BFGS-B",
        bounds=bounds, options={"maxiter": 200000, "maxfun": 400000, "ftol": 1e-16, "gtol": 1e-13, "maxcor": 30},
    )
    Q = np.vstack([a, res.x.reshape(M - 1, 2), b])
    return Q, float(np.sum(_seg_terms(W, Q)[-1]))


def _resample(W, P, M):
    S = _seg_terms(W, P)[-1]
    s = np.concatenate([[0.0], np.cumsum(S)])
    if s[-1] <= 0:
        s = np.linspace(0.0, 1.0, P.shape[0])
    u = np.linspace(0.0, s[-1], M + 1)
    return np.column_stack([np.interp(u, s, P[:, 0]), np.interp(u, s, P[:, 1])])


def grid_geodesic(W: WarpedProduct, r0, r1, L, n=2049, nz=None, M=128):
    """Oracle distance from (r0, 0) to (r1, L) in B x_f [0, L].

    A 16-neighbour Dijkstra on an n x nz grid gives a starting polyline,
    which is relaxed by minimising the discrete energy at M and 2M
    vertices; the two lengths are Richardson-extrapolated.
    """
    r0, r1, L = float(r0), float(r1), float(L)
    if W.B.kind == "circle":
        r1 = _lifts(W, r0, r1)[0]
    nz = n if nz is None else nz
    start, hr, nr = _grid_window(W, r0, r1, L, n)
    hz = L / (nz - 1) if L > 0 else 1.0
    rhalf = start + 0.5 * hr * np.arange(2 * nr - 1)
    fhalf = np.maximum(W.f_at(rhalf), 0.0)
    i0 = round((r0 - start) / hr)
    i1 = round((r1 - start) / hr)
    src = i0 * nz
    dst = i1 * nz + (nz - 1)
    d, pred = _fastgeo.grid_dijkstra(fhalf, hr, hz, nr, nz, src, dst)
    nodes = [dst]
    while nodes[-1] != src:
        nodes.append(int(pred[nodes[-1]]))
    nodes = np.array(nodes[::-1])
    P = np.column_stack([start + hr * (nodes // nz), hz * (nodes % nz)])
    P[0] = (r0, 0.0)
    P[-1] = (r1, L)
    lo, hi = W.bounds
    Q1, l1 = _relax(W, _resample(W, P, M), lo, hi)
    Q2 = np.empty((2 * M + 1, 2))
    Q2[::2] = Q1
    Q2[1::2] = 0.5 * (Q1[:-1] + Q1[1:])
    Q2, l2 = _relax(W, Q2, lo, hi)
    rich = (4.0 * l2 - l1) / 3.0
    return GridGeodesic(
        dijkstra_length=float(d), lengths=(l1, l2), length=float(rich), vertices=Q2,
        L=L, grid_shape=(nr, nz),
    )


def grid_midpoint(W: WarpedProduct, p0, p1, t, **kw):
    """Midpoint read off the relaxed oracle polyline (1D fibers)."""
    (r0, x0), (r1, x1) = p0, p1
    L = fiber_distance(W.F, x0, x1)
    res = grid_geodesic(W, r0, r1, L, **kw)
    path = res.path(2001)
    rt = float(np.interp(t, path.t, path.alpha))
    zt = float(np.interp(t, path.t, path.z))
    return (_wrap_base(W, rt), _fiber_step(W.F, x0, x1, zt))


# Brunn-Minkowski and MCP ---------------------------------------------------

@dataclass(frozen=True)
class ProductSet:
    """Base interval [r_lo, r_hi] times the closed fiber ball B(center, radius)."""

    r_lo: float
    r_hi: float
    center: float
    radius: float

    def __post_init__(self):
        if not (self.r_hi > self.r_lo and self.radius > 0):
            raise EmptySet("product sets need a nondegenerate base interval and positive radius")

    def measure(self, W: WarpedProduct):
        return W.base_measure(self.r_lo, self.r_hi) * W.F.ball_mass(self.center, self.radius)

    def fiber_coords(self, F):
        return F.ball_coords(self.center, self.radius)

    def to_dict(self):
        return {"r": [self.r_lo, self.r_hi], "center": self.center, "radius": self.radius}


def random_product_set(W: WarpedProduct, rng, max_width=0.6, R=3.0):
    lo, hi = W.B.window(R)
    w = rng.uniform(0.15, max_width) * min(1.0, hi - lo)
    a = rng.uniform(lo + 0.05 * (hi - lo), hi - w - 0.05 * (hi - lo))
    F = W.F
    if F.kind == "circle":
        c, rad = rng.uniform(0, F.circumference), rng.uniform(0.2, 0.8)
    elif F.kind == "interval":
        rad = rng.uniform(0.1, 0.3) * F.length
        c = rng.uniform(rad, F.length - rad)
    else:
        raise NotApplicable("product sets need a 1D fiber")
    return ProductSet(float(a), float(a + w), float(c), float(rad))


def _overlap_1d(a0, a1, b0, b1):
    return max(0.0, min(a1, b1) - max(a0, b0))


def intersection_measure(W: WarpedProduct, A: ProductSet, B_: ProductSet):
    lo, hi = max(A.r_lo, B_.r_lo), min(A.r_hi, B_.r_hi)
    if hi <= lo:
        return 0.0
    F = W.F
    a0, a1 = A.fiber_coords(F)
    b0, b1 = B_.fiber_coords(F)
    shifts = (0.0,) if F.kind != "circle" else (-F.circumference, 0.0, F.circumference)
    segs = []
    for s in shifts:
        u, v = max(a0, b0 + s), min(a1, b1 + s)
        if v > u:
            segs.append((u, v))
    if not segs:
        return 0.0
    fm = 0.0
    for u, v in segs:
        x = np.linspace(u, v, 2001)
        fm += float(np.trapezoid(F.density(x), x))
    return W.base_measure(lo, hi) * fm


def _lattice(A: ProductSet, F, nb, hf):
    r = np.linspace(A.r_lo, A.r_hi, nb)
    lo, hi = A.fiber_coords(F)
    k = np.arange(math.floor((lo - A.center) / hf + 1e-9), math.ceil((hi - A.center) / hf - 1e-9) + 1)
    x = np.clip(A.center + k * hf, lo, hi)
    return r, np.unique(x)


def _pair_table(W, r0, r1, L, t, nscan=16, nsteps=100):
    """Midpoint (r_t, z_t) and length for every (r0_i, r1_k, L_j) triple."""
    args = _fast_args(W)
    R0, R1, LL = np.meshgrid(r0, r1, L, indexing="ij")
    shape = R0.shape
    R0, R1, LL = R0.ravel(), R1.ravel(), LL.ravel()
    if W.B.kind == "circle":
        P = W.B.period
        R1 = R0 + np.remainder(R1 - R0 + P / 2, P) - P / 2
    if args is not None:
        lo, hi = W.bounds
        zs = _zeros_for(W, float(min(R0.min(), R1.min())), float(max(R0.max(), R1.max())))
        rt, zt, length, mode = _fastgeo.batch_points(
            *args, R0, R1, LL, np.full(R0.size, float(t)), lo, hi, zs, nscan, nsteps,
        )
        if np.any(mode < 0):
            raise ShootingDiverged(f"{int(np.sum(mode < 0))} pairs without a shortest path")
    else:
        rt, zt, length = np.empty(R0.size), np.empty(R0.size), np.empty(R0.size)
        for i in range(R0.size):
            q0, q1 = (R0[i], 0.0), (R1[i], LL[i])
            d = height_distance(W, R0[i], R1[i], LL[i])
            length[i] = d
            if LL[i] == 0 or W.is_degenerate(R0[i]) or W.is_degenerate(R1[i]):
                rt[i], zt[i] = R0[i] + t * (R1[i] - R0[i]), (LL[i] if t == 1 else 0.0)
                continue
            path = geodesic_2d(W, q0[0], q1[0], LL[i])
            rt[i] = np.interp(t, path.t, path.alpha)
            zt[i] = np.interp(t, path.t, path.z)
    return rt.reshape(shape), zt.reshape(shape), length.reshape(shape)


@dataclass
class BMResult:
    margin: float
    tolerance: float
    lhs: float
    rhs: float
    m0: float
    m1: float
    mt: float
    mt_grid: float
    m_intersection: float
    Theta: float
    t: float
    exponent: float
    grid: dict

    @property
    def passed(self):
        return self.margin >= -self.tolerance

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passed"] = self.passed
        return d


def brunn_minkowski_check(W: WarpedProduct, A0: ProductSet, A1: ProductSet, t, nb=16, nf=16):
    """Brunn-Minkowski margin with exponent 1/(N+1) and coefficients tau_{KN,N+1}.

    A_t is approximated by the t-midpoints of a lattice of pairs, rasterised
    onto a product grid and hole-filled.  The reported tolerance is the
    mass of the mask's boundary cells, carried through the exponent.
    """
    F = W.F
    if F.kind == "finite":
        raise NotApplicable("Brunn-Minkowski sets need a 1D fiber")
    t = float(t)
    m0, m1 = A0.measure(W), A1.measure(W)
    if m0 <= 0 or m1 <= 0:
        raise EmptySet("both sets need positive measure")
    hf = max(2 * A0.radius, 2 * A1.radius) / (nf - 1)
    ra, xa = _lattice(A0, F, nb, hf)
    rb, xb = _lattice(A1, F, nb, hf)
    DX = np.array([[F.arc_delta(u, v) for v in xb] for u in xa])
    Ls = np.round(np.abs(DX), 12)
    Lu, inv = np.unique(Ls, return_inverse=True)
    inv = inv.reshape(Ls.shape)
    rt, zt, length = _pair_table(W, ra, rb, Lu, t)
    # expand to all pairs: axes (i, k, j, l) -> base i, base k, fiber j, fiber l
    RT = rt[:, :, inv]
    ZT = zt[:, :, inv]
    D = length[:, :, inv]
    X = xa[None, None, :, None] + np.sign(DX)[None, None] * ZT
    if F.kind == "circle":
        X = np.mod(X, F.circumference)
    Rm = RT.ravel()
    Xm = X.ravel()
    if W.B.kind == "circle":
        Rm = np.mod(Rm, W.B.period)

    K, N = W.K, W.N
    exponent = 1.0 / (N + 1.0)
    inter = intersection_measure(W, A0, A1)
    Theta = 0.0 if inter > 0 else float(D.min() if K >= 0 else D.max())
    if inter > 0 and K < 0:
        Theta = float(D.max())
    t0 = float(tau(K * N, N + 1, 1 - t, Theta))
    t1 = float(tau(K * N, N + 1, t, Theta))

    # rasterise
    rlo = min(Rm.min(), A0.r_lo, A1.r_lo)
    rhi = max(Rm.max(), A0.r_hi, A1.r_hi)
    if F.kind == "circle":
        xlo, xhi = 0.0, F.circumference
    else:
        xlo, xhi = 0.0, F.length
    # cells no finer than the spacing of the midpoint lattice
    hb = max((1 - t) * (A0.r_hi - A0.r_lo), t * (A1.r_hi - A1.r_lo)) / (nb - 1)
    hb = max(hb, 1e-3 * (rhi - rlo))
    blo, bhi = W.bounds
    rlo, rhi = max(rlo - hb, blo), min(rhi + hb, bhi)
    nrc = max(1, int(math.ceil((rhi - rlo) / hb)))
    hr = (rhi - rlo) / nrc
    nxc = max(1, int((xhi - xlo) / max(hf * max(t, 1 - t), 1e-3 * (xhi - xlo))))
    hx = (xhi - xlo) / nxc
    ir = np.clip(((Rm - rlo) / hr).astype(int), 0, nrc - 1)
    ix = np.clip(((Xm - xlo) / hx).astype(int), 0, nxc - 1)
    mask = np.zeros((nrc, nxc), bool)
    mask[ir, ix] = True
    structure = ndimage.generate_binary_structure(2, 2)
    if F.kind == "circle":
        pad = np.concatenate([mask[:, -2:], mask, mask[:, :2]], axis=1)
        pad = ndimage.binary_closing(pad, structure, border_value=0)
        pad = ndimage.binary_fill_holes(pad)
        mask = pad[:, 2:-2]
    else:
        mask = ndimage.binary_fill_holes(ndimage.binary_closing(mask, structure))
    redges = rlo + hr * np.arange(nrc + 1)
    base_mass = np.array([W.base_measure(redges[i], redges[i + 1], 8) for i in range(nrc)])
    xedges = xlo + hx * np.arange(nxc + 1)
    xx = np.linspace(xlo, xhi, 8 * nxc + 1)
    dens = F.density(xx)
    fib_mass = np.array([np.trapezoid(dens[8 * j:8 * j + 9], xx[8 * j:8 * j + 9]) for j in range(nxc)])
    cellm = base_mass[:, None] * fib_mass[None, :]
    mt_grid = float(np.sum(cellm[mask]))
    if F.kind == "circle":
        inner = ndimage.binary_erosion(np.concatenate([mask[:, -1:], mask, mask[:, :1]], axis=1), structure)[:, 1:-1]
    else:
        inner = ndimage.binary_erosion(mask, structure)
    boundary = mask & ~inner
    tol_m = float(np.sum(cellm[boundary]))
    mt = max(mt_grid, inter)
    lhs = mt ** exponent
    rhs = t0 * m0 ** exponent + t1 * m1 ** exponent
    tol = (mt + tol_m) ** exponent - mt ** exponent
    if inter > 0 and mt == inter:
        tol = max(tol, 0.0)
    return BMResult(
        margin=float(lhs - rhs), tolerance=float(tol), lhs=float(lhs), rhs=float(rhs),
        m0=m0, m1=m1, mt=mt, mt_grid=mt_grid, m_intersection=inter, Theta=Theta, t=t,
        exponent=exponent,
        grid={"pairs": int(Rm.size), "cells": [nrc, nxc], "lattice": [nb, int(xa.size), int(xb.size)]},
    )


@dataclass
class MCPResult:
    margin: float
    tolerance: float
    t: float
    worst_point: tuple
    grid: dict

    @property
    def passed(self):
        return self.margin >= -self.tolerance

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["worst_point"] = list(self.worst_point)
        d["passed"] = self.passed
        return d


def _contract(W, apex, r, x, t):
    """Image of the points (r, x) at parameter t along shortest paths to apex."""
    F = W.F
    ro, xo = apex
    DX = np.array([F.arc_delta(xi, xo) for xi in np.ravel(x)]).reshape(np.shape(x))
    L = np.abs(DX)
    R0 = np.ravel(r).astype(float)
    args = _fast_args(W)
    if args is not None:
        lo, hi = W.bounds
        R1 = np.full(R0.size, float(ro))
        if W.B.kind == "circle":
            P = W.B.period
            R1 = R0 + np.remainder(R1 - R0 + P / 2, P) - P / 2
        zs = _zeros_for(W, float(min(R0.min(), R1.min())), float(max(R0.max(), R1.max())))
        rt, zt, length, mode = _fastgeo.batch_points(
            *args, R0, R1, L.ravel(), np.full(R0.size, float(t)), lo, hi, zs, 16, 200,
        )
        if np.any(mode < 0):
            raise ShootingDiverged("contraction without a shortest path")
    else:
        rt, zt, length = [], [], []
        for ri, li in zip(R0, L.ravel()):
            p = midpoint(W, (ri, 0.0), (ro, li), t) if F.kind == "interval" and li <= F.length else None
            if p is None:
                raise NotApplicable("contraction for non-catalog warps needs an interval fiber")
            rt.append(p[0])
            zt.append(p[1])
            length.append(height_distance(W, ri, ro, li))
        rt, zt, length = map(np.array, (rt, zt, length))
    X = np.ravel(x) + np.sign(DX.ravel()) * zt
    return rt.reshape(np.shape(r)), X.reshape(np.shape(x)), length.reshape(np.shape(r))


def mcp_check(W: WarpedProduct, apex, A: ProductSet, t, n=24, delta=1e-4):
    """Measure contraction toward ``apex`` at parameter t, checked pointwise.

    For each source lattice point p the contraction map Phi_t is
    differentiated numerically; the pushed density f^N(Phi_t p) w(Phi_t p)
    |det DPhi_t| must dominate tau_{KN,N+1}^{(1-t)}(d(p, apex))^{N+1}
    times the source density.  The margin is the minimum of the ratio
    difference over the lattice.
    """
    F = W.F
    if F.kind == "finite":
        raise NotApplicable("contraction needs a 1D fiber")
    t = float(t)
    K, N = W.K, W.N
    lo, hi = A.fiber_coords(F)
    r = A.r_lo + (A.r_hi - A.r_lo) * (np.arange(n) + 0.5) / n
    x = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    R, X = np.meshgrid(r, x, indexing="ij")
    if np.any(W.density(R) <= 0):
        raise EmptySet("source set meets a zero of f")
    rt, xt, d = _contract(W, apex, R, X, t)
    if K > 0 and np.any(d >= math.pi / math.sqrt(K) - 1e-12):
        raise SupportViolation("source set reaches the conjugate radius of the apex")
    bound = np.asarray(tau(K * N, N + 1, 1 - t, d), float) ** (N + 1)
    if t == 1.0:
        jac = np.zeros_like(R)
    else:
        rp, xp, _ = _contract(W, apex, R + delta, X, t)
        rm, xm, _ = _contract(W, apex, R - delta, X, t)
        rq, xq, _ = _contract(W, apex, R, X + delta, t)
        rn, xn, _ = _contract(W, apex, R, X - delta, t)
        if F.kind == "circle":
            C = F.circumference
            wrap = lambda a: np.remainder(a + C / 2, C) - C / 2
        else:
            wrap = lambda a: a
        a11 = (rp - rm) / (2 * delta)
        a21 = wrap(xp - xm) / (2 * delta)
        a12 = (rq - rn) / (2 * delta)
        a22 = wrap(xq - xn) / (2 * delta)
        jac = np.abs(a11 * a22 - a12 * a21)
    src = W.density(R) * F.density(X)
    xt_eval = np.mod(xt, F.circumference) if F.kind == "circle" else xt
    pushed = W.density(rt) * F.density(xt_eval) * jac
    ratio = pushed / src - bound
    k = np.unravel_index(np.argmin(ratio), ratio.shape)
    tol = 1e-5 * max(1.0, float(np.max(bound)))
    return MCPResult(
        margin=float(ratio[k]), tolerance=tol, t=t,
        worst_point=(float(R[k]), float(X[k])),
        grid={"lattice": [n, n], "delta": delta},
    )
