"""fK-concavity, boundary condition, K_F, gluing, mollification and surgery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    NoZeroCrossing,
    NothingToGlue,
    PreconditionFailed,
    TooCloseToBoundary,
)
from .kernel import cos_kappa, sigma_kappa, sin_kappa
from .warp import BaseSpace, WarpFunction

LATTICE_N = 257
ANALYTIC_TOL = 1e-8
ZERO_TOL = 1e-12
DEFAULT_R = 5.0


class AlexandrovDerivative(NamedTuple):
    plus: float
    minus: float
    D: float
    clipped: bool  # True when the 0 in max{f+, -f-, 0} is the active entry


def alexandrov_derivative(f: WarpFunction, r: float, base: BaseSpace | None = None):
    """One-sided derivatives and Df = max{f+, -f-, 0} at r."""
    plus, minus = f.one_sided(r, base)
    candidates = [c for c in (plus, -minus) if not math.isnan(c)]
    two_sided = max(candidates)
    D = max(two_sided, 0.0)
    return AlexandrovDerivative(plus, minus, D, two_sided < 0.0)


@dataclass
class ConcavityReport:
    is_fK_concave: bool
    worst_violation: float
    boundary_ok: bool
    K_F: float
    zero_set_nonempty: bool
    tolerance: float
    n_pairs: int
    clipped_points: list = field(default_factory=list)
    boundary_margins: list = field(default_factory=list)

    def to_dict(self):
        return {
            "is_fK_concave": self.is_fK_concave,
            "worst_violation": self.worst_violation,
            "boundary_ok": self.boundary_ok,
            "K_F": self.K_F,
            "zero_set_nonempty": self.zero_set_nonempty,
            "tolerance": self.tolerance,
            "n_pairs": self.n_pairs,
            "clipped_points": self.clipped_points,
        }


def lattice(B: BaseSpace, n=LATTICE_N, R=DEFAULT_R):
    lo, hi = B.window(R)
    if B.kind == "circle":
        return np.linspace(lo, hi, n, endpoint=False)
    return np.linspace(lo, hi, n)


def default_tolerance(f: WarpFunction):
    if not f.is_sampled:
        return ANALYTIC_TOL
    slopes = np.diff(f.values) / np.diff(f.grid)
    h = f.spacing
    lip = np.max(np.abs(np.diff(slopes))) / h if slopes.size > 1 else 0.0
    return max(ANALYTIC_TOL, h * lip)


def concavity_margins(B: BaseSpace, f: WarpFunction, n=LATTICE_N, R=DEFAULT_R):
    """Signed violations sigma-combination minus f at the interpolated point.

    Positive entries are violations of the fK-concavity inequality.
    """
    x = lattice(B, n, R)
    h = x[1] - x[0]
    K = f.K
    lo, hi = B.window(R)
    kmax = n - 1
    if B.kind == "circle":
        # arcs must stay shorter than half the period
        kmax = min(kmax, int(math.ceil(B.period / 2 / h - 1e-9)) - 1)
    if K > 0:
        kmax = min(kmax, int(math.ceil(math.pi / math.sqrt(K) / h - 1e-9)) - 1)
    if kmax < 1:
        return np.zeros(0)
    i0, k = np.meshgrid(np.arange(n), np.arange(1, kmax + 1), indexing="ij")
    i0, k = i0.ravel(), k.ravel()
    if B.kind != "circle":
        keep = i0 + k < n
        i0, k = i0[keep], k[keep]
    # every sample sits on the quarter lattice, so f is evaluated once per node
    if B.kind == "circle":
        m = 4 * n
        nodes = _wrap(B, lo + np.arange(m) * (h / 4))
    else:
        m = 4 * (n - 1) + 1
        nodes = np.linspace(lo, hi, m)
    q = np.asarray(f(nodes), float)

    def at(j):
        return q[j % m] if B.kind == "circle" else q[j]

    theta = k * h
    f0, f1 = at(4 * i0), at(4 * (i0 + k))
    out = []
    for s, j in ((0.25, 1), (0.5, 2), (0.75, 3)):
        rhs = sigma_kappa(K, 1 - s, theta) * f0 + sigma_kappa(K, s, theta) * f1
        out.append(rhs - at(4 * i0 + j * k))
    return np.concatenate(out)


def _wrap(B, r):
    return np.mod(r, B.period) if B.kind == "circle" else r


def _df_on_lattice(B, f, x):
    """Df at each lattice point plus indices where the clip at 0 is active."""
    if f.is_smooth and not f.is_sampled:
        d = np.asarray(f.derivative(x), float)
        D = np.abs(d)
        for p, nrm in B.boundary:
            j = np.where(np.abs(x - p) < 1e-12)[0]
            # only the inward one-sided derivative exists at a boundary point
            D[j] = np.maximum(d[j] if nrm < 0 else -d[j], 0.0)
        clipped = []
        return D, clipped
    D = np.empty_like(x)
    clipped = []
    for j, r in enumerate(x):
        a = alexandrov_derivative(f, r, B)
        D[j] = a.D
        if a.clipped:
            clipped.append(float(r))
    return D, clipped


def compute_KF(B: BaseSpace, f: WarpFunction, n=LATTICE_N, R=DEFAULT_R):
    x = lattice(B, n, R)
    D, clipped = _df_on_lattice(B, f, x)
    return float(np.max(D ** 2 + f.K * np.asarray(f(x)) ** 2)), clipped


def boundary_margins(B: BaseSpace, f: WarpFunction):
    """Outward normal derivatives at boundary points where f > 0."""
    out = []
    for p, nrm in B.boundary:
        if f(p) <= ZERO_TOL:
            continue
        plus, minus = f.one_sided(p, B)
        dn = -plus if nrm < 0 else minus
        out.append((float(p), float(dn)))
    return out


def check_fK_concavity(B: BaseSpace, f: WarpFunction, tol=None, n=LATTICE_N, R=DEFAULT_R):
    tol = default_tolerance(f) if tol is None else tol
    m = concavity_margins(B, f, n, R)
    worst = float(np.max(m)) if m.size else 0.0
    bm = boundary_margins(B, f)
    K_F, clipped = compute_KF(B, f, n, R)
    x = lattice(B, n, R)
    zero = bool(np.any(np.asarray(f(x)) <= ZERO_TOL))
    return ConcavityReport(
        is_fK_concave=worst <= tol,
        worst_violation=worst,
        boundary_ok=all(dn >= -tol for _, dn in bm),
        K_F=K_F,
        zero_set_nonempty=zero,
        tolerance=tol,
        n_pairs=int(m.size // 3),
        clipped_points=clipped,
        boundary_margins=bm,
    )


def pythagorean_residual(B: BaseSpace, f: WarpFunction, K_F: float, n=LATTICE_N, R=DEFAULT_R):
    """sup over the lattice of |(f')^2 + K f^2 - K_F|."""
    x = lattice(B, n, R)
    d = np.asarray(f.derivative(x), float)
    return float(np.max(np.abs(d ** 2 + f.K * np.asarray(f(x)) ** 2 - K_F)))


def affine_residual(B: BaseSpace, f: WarpFunction, n=LATTICE_N, R=DEFAULT_R):
    """sup over the lattice of |f'' + K f|, relative to the size of f."""
    x = lattice(B, n, R)
    fx = np.asarray(f(x), float)
    if f.is_sampled:
        h = x[1] - x[0]
        d2 = (fx[2:] - 2 * fx[1:-1] + fx[:-2]) / h ** 2
        res = d2 + f.K * fx[1:-1]
    else:
        res = np.asarray(f.derivative(x, 2), float) + f.K * fx
    scale = max(1.0, float(np.max(np.abs(fx))))
    return float(np.max(np.abs(res)) / scale)


def kf_equivalence(B: BaseSpace, f: WarpFunction, K_F: float, tol=ANALYTIC_TOL, n=LATTICE_N, R=DEFAULT_R):
    """Both sides of the K_F characterization, as booleans (lhs, rhs).

    lhs: K_F >= (Df)^2 + K f^2 everywhere on the lattice.
    rhs: K_F >= K inf f^2 if no boundary zero exists, else K_F >= (Df)^2
    at every zero of f.
    """
    rep = check_fK_concavity(B, f, n=n, R=R)
    if not (rep.is_fK_concave and rep.boundary_ok):
        raise PreconditionFailed("kf_equivalence needs an fK-concave warp satisfying the boundary condition")
    x = lattice(B, n, R)
    fx = np.asarray(f(x), float)
    D, _ = _df_on_lattice(B, f, x)
    lhs = bool(K_F >= np.max(D ** 2 + f.K * fx ** 2) - tol)
    boundary_zero = any(f(p) <= ZERO_TOL for p, _ in B.boundary)
    if not boundary_zero:
        rhs = bool(K_F >= f.K * np.min(fx ** 2) - tol)
    else:
        zeros = fx <= ZERO_TOL
        rhs = bool(K_F >= np.max(D[zeros] ** 2) - tol)
    return lhs, rhs


# gluing ------------------------------------------------------------------

def dagger_glue(B: BaseSpace, f: WarpFunction):
    """Double B along the boundary points where f does not vanish.

    Returns the glued base and the mirrored warp.  Bases whose boundary
    lies in the zero set come back unchanged.
    """
    if not B.boundary:
        raise NothingToGlue(f"{B.kind} has empty boundary")
    live = [(p, n) for p, n in B.boundary if f(p) > ZERO_TOL]
    if not live:
        return B, f
    K = f.K
    if B.kind == "halfline":
        o = B.a
        fn = lambda r: f(o + np.abs(np.asarray(r) - o))
        return BaseSpace.line(), WarpFunction.from_callable(fn, K, name="glued", parent=f.name)
    a, b = B.a, B.b
    if len(live) == 2:
        L = b - a
        fn = lambda u: f(a + L - np.abs(L - np.mod(np.asarray(u, float), 2 * L)))
        return BaseSpace.circle(2 * L), WarpFunction.from_callable(fn, K, name="glued", parent=f.name)
    p, n = live[0]
    if n > 0:
        fn = lambda r: f(b - np.abs(b - np.asarray(r, float)))
        return BaseSpace.interval(a, 2 * b - a), WarpFunction.from_callable(fn, K, name="glued", parent=f.name)
    fn = lambda r: f(a + np.abs(np.asarray(r, float) - a))
    return BaseSpace.interval(2 * a - b, b), WarpFunction.from_callable(fn, K, name="glued", parent=f.name)


# mollification -----------------------------------------------------------

_MOLL_N = 401
_MOLL_CHUNK = 4096


def _bump_tables():
    x = np.linspace(-1.0, 1.0, _MOLL_N)[1:-1]
    w = np.full(x.size, x[1] - x[0])
    with np.errstate(over="ignore", under="ignore"):
        one = 1.0 - x * x
        phi = np.exp(-1.0 / one)
        g1 = -2.0 * x / one ** 2
        g2 = -(2.0 + 6.0 * x * x) / one ** 3
    c = 1.0 / np.sum(w * phi)
    phi = c * phi
    return x, w * phi, w * phi * g1, w * phi * (g1 * g1 + g2)


_BUMP = _bump_tables()


def mollify_warp(f: WarpFunction, eps: float, B: BaseSpace | None = None):
    """Convolution of f with the rescaled even bump of width eps.

    The result carries exact kernel-derivative formulas for its first and
    second derivatives.  Points closer than eps to the boundary of B raise
    TooCloseToBoundary.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x, w0, w1, w2 = _BUMP

    def guard(s):
        s = np.asarray(s, float)
        if B is not None:
            for p, _ in B.boundary:
                if np.any(np.abs(s - p) < eps * (1 - 1e-12)):
                    raise TooCloseToBoundary(f"evaluation within {eps} of boundary point {p}")
        return s

    def conv(s, weights, scale):
        s = guard(s)
        flat = s.ravel()
        out = np.empty(flat.size)
        for i in range(0, flat.size, _MOLL_CHUNK):
            part = flat[i:i + _MOLL_CHUNK]
            out[i:i + _MOLL_CHUNK] = np.asarray(f(part[:, None] + eps * x), float) @ weights
        out = scale * out.reshape(s.shape)
        return out if out.ndim else float(out)

    return WarpFunction.from_callable(
        lambda s: conv(s, w0, 1.0),
        f.K,
        d1=lambda s: conv(s, w1, -1.0 / eps),
        d2=lambda s: conv(s, w2, 1.0 / eps ** 2),
        name="mollified",
        eps=eps,
        parent=f.name,
    )


# boundary surgery --------------------------------------------------------

@dataclass
class SurgeryResult:
    h: WarpFunction
    base: BaseSpace
    t0: dict
    K_eps: dict


def _first_zero(A, Bslope, kappa):
    """First positive zero of A cos_k(s) - Bslope sin_k(s), or None."""
    if kappa > 0:
        w = math.sqrt(kappa)
        return math.atan2(A * w, Bslope) / w if A > 0 else 0.0
    if kappa == 0:
        return A / Bslope if Bslope > 0 else None
    w = math.sqrt(-kappa)
    ratio = A * w / Bslope if Bslope > 0 else math.inf
    return math.atanh(ratio) / w if ratio < 1 else None


def boundary_surgery(B: BaseSpace, f: WarpFunction, eps: float, eta: float | None = None):
    """Replace f near each degenerate boundary point by a kappa-sine cap.

    Near a boundary zero p (inward direction d) the new warp is the
    mollified f beyond distance eps and the solution of
    g'' + K(eps) g = 0 matching f_eps to second order at distance eps,
    continued until it vanishes.  ``eta`` bounds f_eps at distance eps
    (default f+(p)/8); the cap length must stay below the comparison
    bound for data (eta, f+(p)/2) at curvature K.
    """
    if B.kind not in ("halfline", "interval"):
        raise PreconditionFailed("surgery needs a base with boundary")
    if any(f(p) > ZERO_TOL for p, _ in B.boundary):
        raise PreconditionFailed("surgery needs the boundary inside the zero set")
    fe = mollify_warp(f, eps)
    pieces = []
    t0s, keps = {}, {}
    for p, nrm in B.boundary:
        d = -nrm  # inward direction
        plus, minus = f.one_sided(p, B)
        slope0 = plus if d > 0 else -minus
        if not slope0 > 0:
            raise PreconditionFailed(f"warp has no positive inward slope at {p}")
        xi = slope0 / 2
        eta_p = slope0 / 8 if eta is None else eta
        if not 0 < eta_p < slope0 / 4:
            raise PreconditionFailed("eta must lie in (0, f+(p)/4)")
        s_eps = p + d * eps
        A = float(fe(s_eps))
        Bs = float(fe.derivative(s_eps)) * d  # inward slope
        if A > eta_p:
            raise NoZeroCrossing(f"f_eps({s_eps}) = {A} exceeds eta = {eta_p}; decrease eps")
        Ke = -float(fe.derivative(s_eps, 2)) / A
        t0 = _first_zero(A, Bs, Ke)
        bound = _first_zero(eta_p, xi, f.K)
        if t0 is None or (bound is not None and t0 > bound * (1 + 1e-9)):
            raise NoZeroCrossing(f"no zero of the cap at boundary point {p}")
        t0s[p], keps[p] = t0, Ke
        pieces.append((p, d, s_eps, A, Bs, Ke, t0))

    def make(order):
        def fn(r):
            r = np.asarray(r, float)
            out = np.zeros(r.shape)
            inner = np.ones(r.shape, bool)
            for p, d, s_eps, A, Bs, Ke, t0 in pieces:
                u = (s_eps - r) * d  # distance from s_eps towards the boundary
                cap = u >= 0
                inner &= ~cap
                uu = np.clip(u[cap], 0.0, t0)
                if order == 0:
                    val = A * cos_kappa(Ke, uu) - Bs * sin_kappa(Ke, uu)
                elif order == 1:
                    val = -d * (-A * Ke * sin_kappa(Ke, uu) - Bs * cos_kappa(Ke, uu))
                else:
                    val = -Ke * (A * cos_kappa(Ke, uu) - Bs * sin_kappa(Ke, uu))
                out[cap] = np.where(u[cap] <= t0, val, 0.0)
            if inner.any():
                src = fe if order == 0 else (lambda q: fe.derivative(q, order))
                out[inner] = np.asarray(src(r[inner]), float)
            return out if out.ndim else float(out)
        return fn

    h = WarpFunction.from_callable(make(0), f.K, d1=make(1), d2=make(2), name="surgered", eps=eps)
    lo = [p + d * (eps - t0) for p, d, _, _, _, _, t0 in pieces]
    if B.kind == "halfline":
        nb = BaseSpace.halfline(lo[0])
    else:
        nb = BaseSpace.interval(lo[0], lo[1])
    return SurgeryResult(h=h, base=nb, t0=t0s, K_eps=keps)
