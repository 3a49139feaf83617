"""Model fibers: weighted interval, circle, and finite metric spaces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import GridTooCoarse, NotApplicable, OutOfRange
from .warp import WarpFunction

MIN_GRID = 16


@dataclass(frozen=True)
class RCDAttestation:
    """Externally supplied claim that a fiber satisfies RCD(K, N)."""

    K: float
    N: float
    verified: bool = True
    compact: bool = True
    geodesic: bool = True

    def implies(self, K, N, slack=1e-12):
        """RCD(K', N') implies RCD(K, N) whenever K <= K' and N >= N'."""
        return self.K >= K - slack and self.N <= N + slack

    def to_dict(self):
        return {"K": self.K, "N": self.N, "verified": self.verified,
                "compact": self.compact, "geodesic": self.geodesic}


@dataclass(frozen=True, eq=False)
class FiberSpace:
    """A fiber (F, d_F, m_F).

    kind "interval": [0, length] with density w(x)^M, w a catalog warp.
    kind "circle":   circle of the given circumference, arclength measure.
    kind "finite":   points with a distance matrix and positive weights.
    """

    kind: str
    length: float = math.pi
    weight_exponent: float = 0.0
    weight: str = "const"
    weight_params: tuple = (1.0, 1.0, 0.0)
    circumference: float = 2 * math.pi
    distances: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    labels: tuple = ()
    rcd: Optional[RCDAttestation] = None

    def __post_init__(self):
        if self.kind == "interval":
            if not self.length > 0 or self.weight_exponent < 0:
                raise ValueError("interval fiber needs length > 0 and weight exponent >= 0")
        elif self.kind == "circle":
            if not self.circumference > 0:
                raise ValueError("circle fiber needs positive circumference")
        elif self.kind == "finite":
            _validate_finite(self.distances, self.weights)
        else:
            raise ValueError(f"unknown fiber kind {self.kind!r}")

    @classmethod
    def interval(cls, length, weight_exponent=0.0, weight="const", weight_params=(1.0, 1.0, 0.0), rcd=None):
        return cls("interval", length=float(length), weight_exponent=float(weight_exponent),
                   weight=weight, weight_params=tuple(weight_params), rcd=rcd)

    @classmethod
    def circle(cls, circumference=2 * math.pi, rcd=None):
        return cls("circle", circumference=float(circumference), rcd=rcd)

    @classmethod
    def finite(cls, distances, weights, labels=(), rcd=None):
        return cls("finite", distances=np.asarray(distances, float),
                   weights=np.asarray(weights, float), labels=tuple(labels), rcd=rcd)

    @classmethod
    def from_csv(cls, distance_path, weight_path, rcd=None):
        """Load a finite fiber from a labelled distance matrix and a weight file.

        The distance file has a header row of labels and a label in the first
        column of every row; the weight file has ``label,weight`` rows.
        """
        with open(distance_path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        labels = [c.strip() for c in rows[0][1:]]
        if [r[0].strip() for r in rows[1:]] != labels:
            raise ValueError(f"{distance_path}: row labels must match column labels")
        D = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
        with open(weight_path, newline="") as fh:
            wrows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if wrows and wrows[0][0].strip().lower() == "label":
            wrows = wrows[1:]
        wmap = {r[0].strip(): float(r[1]) for r in wrows}
        missing = set(labels) - set(wmap)
        if missing:
            raise ValueError(f"{weight_path}: no weight for {sorted(missing)}")
        return cls.finite(D, [wmap[l] for l in labels], labels, rcd=rcd)

    def with_rcd(self, rcd):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw["rcd"] = rcd
        return FiberSpace(**kw)

    # geometry -----------------------------------------------------------
    @property
    def diameter(self):
        if self.kind == "interval":
            return self.length
        if self.kind == "circle":
            return self.circumference / 2
        return float(np.max(self.distances))

    @property
    def total_mass(self):
        if self.kind == "finite":
            return float(np.sum(self.weights))
        if self.kind == "circle":
            return self.circumference
        x = np.linspace(0, self.length, 4001)
        return float(np.trapezoid(self.density(x), x))

    def density(self, x):
        """Density of m_F with respect to arclength (1D fibers)."""
        if self.kind == "circle":
            return np.ones_like(np.asarray(x, float))
        if self.kind != "interval":
            raise NotApplicable("finite fibers have no density")
        amp, rate, shift = self.weight_params
        w = WarpFunction.catalog(self.weight, 0.0, amp, rate, shift)
        return np.abs(np.asarray(w(x), float)) ** self.weight_exponent

    def log_density_slope(self, x):
        amp, rate, shift = self.weight_params
        w = WarpFunction.catalog(self.weight, 0.0, amp, rate, shift)
        return self.weight_exponent * np.asarray(w.derivative(x), float) / np.asarray(w(x), float)

    def ball_mass(self, center, radius, n=2001):
        """m_F of the closed ball around a point of a 1D fiber."""
        lo, hi = self.ball_coords(center, radius)
        if self.kind == "circle":
            return hi - lo
        x = np.linspace(lo, hi, n)
        return float(np.trapezoid(self.density(x), x))

    def ball_coords(self, center, radius):
        """Coordinate interval of a ball in a 1D fiber (unwrapped for circles)."""
        if self.kind == "circle":
            r = min(radius, self.circumference / 2)
            return center - r, center + r
        if self.kind == "interval":
            return max(0.0, center - radius), min(self.length, center + radius)
        raise NotApplicable("balls are only tabulated for 1D fibers")

    def check_point(self, x):
        if self.kind == "interval":
            if not -1e-12 <= x <= self.length + 1e-12:
                raise OutOfRange(f"{x} outside [0, {self.length}]")
        elif self.kind == "finite":
            if not (isinstance(x, (int, np.integer)) and 0 <= x < len(self.weights)):
                raise OutOfRange(f"{x} is not a point index of the finite fiber")
        elif not np.isfinite(x):
            raise OutOfRange(f"{x} is not a circle coordinate")

    def arc_delta(self, x, y):
        """Signed displacement along the fiber geodesic from x to y (1D fibers)."""
        if self.kind == "circle":
            c = self.circumference
            d = math.fmod(y - x, c)
            if d > c / 2:
                d -= c
            elif d < -c / 2:
                d += c
            return d
        return y - x


def fiber_distance(F: FiberSpace, x, y):
    F.check_point(x)
    F.check_point(y)
    if F.kind == "finite":
        return float(F.distances[x, y])
    return abs(F.arc_delta(x, y))


def _validate_finite(D, w):
    D = np.asarray(D, float)
    w = np.asarray(w, float)
    n = w.size
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square and match the weights")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if not np.allclose(D, D.T, atol=0):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have zero diagonal")
    off = D[~np.eye(n, dtype=bool)]
    if np.any(off <= 0):
        raise ValueError("distinct points must have positive distance")
    # d(i,k) <= d(i,j) + d(j,k) for all triples
    via = D[:, :, None] + D[None, :, :]
    if np.any(D[:, None, :] > via + 1e-12 * np.max(D)):
        raise ValueError("distance matrix violates the triangle inequality")


@dataclass
class FiberSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, m_F-orthonormal
    grid: np.ndarray
    mass: np.ndarray  # quadrature weights of m_F on the grid
    stiffness: Optional[np.ndarray] = None

    def rayleigh(self, u):
        return float(u @ (self.stiffness @ u)) / float(u @ (self.mass * u))


def fiber_operator(F: FiberSpace, grid_n: int):
    """Grid, m_F quadrature weights and the symmetric stiffness matrix.

    The weighted Neumann Laplacian is mass^{-1} @ (-stiffness).
    """
    if F.kind == "finite":
        D, w = F.distances, F.weights
        with np.errstate(divide="ignore"):
            C = np.where(D > 0, np.outer(w, w) / D ** 2, 0.0)
        S = np.diag(C.sum(axis=1)) - C
        return np.arange(w.size, dtype=float), w.copy(), S
    if grid_n < MIN_GRID:
        raise GridTooCoarse(f"grid_n={grid_n} < {MIN_GRID}")
    if F.kind == "circle":
        h = F.circumference / grid_n
        x = np.arange(grid_n) * h
        mass = np.full(grid_n, h)
        S = np.zeros((grid_n, grid_n))
        i = np.arange(grid_n)
        S[i, i] = 2 / h
        S[i, (i + 1) % grid_n] = -1 / h
        S[i, (i - 1) % grid_n] = -1 / h
        return x, mass, S
    # cell-centred finite volumes, zero flux through both end faces
    h = F.length / grid_n
    x = (np.arange(grid_n) + 0.5) * h
    faces = np.arange(1, grid_n) * h
    wc = F.density(x)
    wf = F.density(faces)
    S = np.zeros((grid_n, grid_n))
    i = np.arange(grid_n - 1)
    S[i, i] += wf / h
    S[i + 1, i + 1] += wf / h
    S[i, i + 1] -= wf / h
    S[i + 1, i] -= wf / h
    return x, wc * h, S


def fiber_spectrum(F: FiberSpace, grid_n: int, k: Optional[int] = None):
    x, mass, S = fiber_operator(F, grid_n)
    n = mass.size
    k = n if k is None else min(k, n)
    vals, vecs = linalg.eigh(S, np.diag(mass), subset_by_index=[0, k - 1])
    vals = np.maximum(vals, 0.0) if vals[0] > -1e-9 else vals
    # normalize sign so the largest entry of each eigenvector is positive
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] *= -1
    return FiberSpectrum(eigenvalues=vals, eigenvectors=vecs, grid=x, mass=mass, stiffness=S)


def fiber_laplacian(F: FiberSpace, grid_n: int):
    """Dense matrix of the weighted Neumann Laplacian L^F on the fiber grid."""
    x, mass, S = fiber_operator(F, grid_n)
    return x, mass, -S / mass[:, None]


@dataclass
class LichnerowiczResult:
    lambda1: float
    bound: float
    margin: float


def lichnerowicz_check(spec: FiberSpectrum, K_F: float, N: float):
    """Compare the first nonzero eigenvalue with K_F N."""
    if K_F <= 0:
        raise NotApplicable("the spectral gap bound needs K_F > 0")
    lam1 = float(spec.eigenvalues[1])
    return LichnerowiczResult(lam1, K_F * N, lam1 - K_F * N)
