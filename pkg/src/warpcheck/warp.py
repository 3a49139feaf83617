"""Base spaces and warp functions.

A warp is either a catalog entry ``amp * g(rate * (r - shift))`` with
``g`` one of sin, id, const, sinh, exp, cosh, a sampled piecewise-linear
function, or an arbitrary callable (used for mollified and surgically
modified warps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NeedsSmoothness, NotSemiConcave

CATALOG = ("sin", "id", "const", "sinh", "exp", "cosh")

# kappa_g with g'' = -kappa_g g, and c_g = g'^2 + kappa_g g^2
_KAPPA = {"sin": 1.0, "id": 0.0, "const": 0.0, "sinh": -1.0, "exp": -1.0, "cosh": -1.0}
_PYTH = {"sin": 1.0, "id": 1.0, "const": 0.0, "sinh": 1.0, "exp": 0.0, "cosh": -1.0}


def _g(name, x, order):
    if name == "sin":
        return (np.sin, np.cos, lambda y: -np.sin(y))[order](x)
    if name == "id":
        return (lambda y: y, np.ones_like, np.zeros_like)[order](x)
    if name == "const":
        return (np.ones_like, np.zeros_like, np.zeros_like)[order](x)
    if name == "sinh":
        return (np.sinh, np.cosh, np.sinh)[order](x)
    if name == "exp":
        return np.exp(x)
    if name == "cosh":
        return (np.cosh, np.sinh, np.cosh)[order](x)
    raise ValueError(f"unknown catalog warp {name!r}")


@dataclass(frozen=True)
class BaseSpace:
    """One of the four one-dimensional model bases.

    ``kind`` is "circle", "line", "halfline" or "interval".  For a
    halfline ``a`` is the origin; for an interval ``[a, b]``.
    """

    kind: str
    a: float = 0.0
    b: float = math.inf
    period: float = 2 * math.pi

    def __post_init__(self):
        if self.kind not in ("circle", "line", "halfline", "interval"):
            raise ValueError(f"unknown base kind {self.kind!r}")
        if self.kind == "interval" and not self.b > self.a:
            raise ValueError("interval needs b > a")
        if self.kind == "circle" and not self.period > 0:
            raise ValueError("circle period must be positive")

    @classmethod
    def circle(cls, period=2 * math.pi):
        return cls("circle", period=float(period))

    @classmethod
    def line(cls):
        return cls("line", a=-math.inf)

    @classmethod
    def halfline(cls, origin=0.0):
        return cls("halfline", a=float(origin))

    @classmethod
    def interval(cls, a, b):
        return cls("interval", a=float(a), b=float(b))

    @property
    def boundary(self):
        """Boundary points paired with their outward normal (+1 or -1)."""
        if self.kind == "halfline":
            return ((self.a, -1.0),)
        if self.kind == "interval":
            return ((self.a, -1.0), (self.b, 1.0))
        return ()

    @property
    def diameter(self):
        if self.kind == "interval":
            return self.b - self.a
        if self.kind == "circle":
            return self.period / 2
        return math.inf

    def window(self, R=5.0):
        """Coordinate range used for sampling; unbounded ends are cut at R."""
        if self.kind == "interval":
            return self.a, self.b
        if self.kind == "halfline":
            return self.a, self.a + R
        if self.kind == "line":
            return -R, R
        return 0.0, self.period

    def distance(self, r, s):
        d = np.abs(np.asarray(s, float) - np.asarray(r, float))
        if self.kind == "circle":
            d = np.mod(d, self.period)
            d = np.minimum(d, self.period - d)
        return d

    def contains(self, r, slack=1e-12):
        r = np.asarray(r, float)
        if self.kind in ("interval", "halfline"):
            return bool(np.all((r >= self.a - slack) & (r <= self.b + slack)))
        return True

    def to_dict(self):
        if self.kind == "circle":
            return {"kind": "circle", "period": self.period}
        if self.kind == "halfline":
            return {"kind": "halfline", "origin": self.a}
        if self.kind == "interval":
            return {"kind": "interval", "a": self.a, "b": self.b}
        return {"kind": "line"}


@dataclass(frozen=True, eq=False)
class WarpFunction:
    """A nonnegative warp f on a base, tested against curvature parameter K."""

    K: float
    name: str = "custom"
    params: tuple = (1.0, 1.0, 0.0)
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    func: Optional[Callable] = None
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    # constructors -------------------------------------------------------
    @classmethod
    def catalog(cls, name, K, amp=1.0, rate=1.0, shift=0.0):
        if name not in CATALOG:
            raise ValueError(f"unknown catalog warp {name!r}; expected one of {CATALOG}")
        return cls(K=float(K), name=name, params=(float(amp), float(rate), float(shift)))

    @classmethod
    def sampled(cls, grid, values, K):
        grid = np.asarray(grid, float)
        values = np.asarray(values, float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be equal-length 1D arrays")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("sample grid must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("warp samples must be nonnegative")
        return cls(K=float(K), name="sampled", grid=grid, values=values)

    @classmethod
    def from_callable(cls, func, K, d1=None, d2=None, name="custom", **meta):
        return cls(K=float(K), name=name, func=func, d1=d1, d2=d2, meta=dict(meta))

    def with_K(self, K):
        return WarpFunction(
            K=float(K), name=self.name, params=self.params, grid=self.grid,
            values=self.values, func=self.func, d1=self.d1, d2=self.d2, meta=self.meta,
        )

    # classification -----------------------------------------------------
    @property
    def is_catalog(self):
        return self.name in CATALOG

    @property
    def is_sampled(self):
        return self.grid is not None

    @property
    def is_smooth(self):
        """True when exact first and second derivatives are available."""
        return self.is_catalog or (self.d1 is not None and self.d2 is not None)

    @property
    def spacing(self):
        return float(np.max(np.diff(self.grid))) if self.is_sampled else 0.0

    # evaluation ---------------------------------------------------------
    def _catalog_eval(self, r, order):
        amp, rate, shift = self.params
        x = rate * (np.asarray(r, float) - shift)
        return amp * rate ** order * _g(self.name, x, order)

    def __call__(self, r):
        if self.is_catalog:
            out = self._catalog_eval(r, 0)
        elif self.is_sampled:
            out = np.interp(r, self.grid, self.values)
        else:
            out = self.func(np.asarray(r, float))
        return out if np.ndim(out) else float(out)

    def derivative(self, r, order=1):
        """Exact derivative when available, otherwise a finite-difference estimate.

        Sampled warps have no second derivative (NeedsSmoothness).
        """
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        r = np.asarray(r, float)
        if self.is_catalog:
            out = self._catalog_eval(r, order)
        elif order == 1 and self.d1 is not None:
            out = self.d1(r)
        elif order == 2 and self.d2 is not None:
            out = self.d2(r)
        elif self.is_sampled:
            if order == 2:
                raise NeedsSmoothness("sampled warp has no second derivative")
            slopes = np.diff(self.values) / np.diff(self.grid)
            idx = np.clip(np.searchsorted(self.grid, r, side="right") - 1, 0, slopes.size - 1)
            out = slopes[idx]
        else:
            h = 1e-5 if order == 1 else 1e-4
            if order == 1:
                out = (self(r + h) - self(r - h)) / (2 * h)
            else:
                out = (self(r + h) - 2 * self(r) + self(r - h)) / h ** 2
        out = np.asarray(out, float)
        return out if out.ndim else float(out)

    def one_sided(self, r, base=None):
        """Right and left derivatives (f_plus, f_minus) at a scalar point r.

        Missing sides at a boundary of ``base`` come back as nan.
        """
        r = float(r)
        has_right = has_left = True
        if base is not None:
            for p, n in base.boundary:
                if abs(r - p) < 1e-12:
                    has_right, has_left = n < 0, n > 0
        if self.is_smooth:
            d = float(self.derivative(r))
            plus, minus = d, d
        elif self.is_sampled:
            plus, minus = _sampled_one_sided(self, r)
        else:
            plus = _richardson_quotient(self, r, +1.0)
            minus = _richardson_quotient(self, r, -1.0)
        return (plus if has_right else math.nan, minus if has_left else math.nan)

    # catalog identities -------------------------------------------------
    def affine_K(self):
        """K for which this catalog warp satisfies f'' + K f = 0."""
        if not self.is_catalog:
            return None
        return self.params[1] ** 2 * _KAPPA[self.name]

    def model_KF(self):
        """(f')^2 + K f^2 for a catalog warp at its affine K."""
        if not self.is_catalog:
            return None
        amp, rate, _ = self.params
        return amp ** 2 * rate ** 2 * _PYTH[self.name]

    def to_dict(self):
        if self.is_catalog:
            amp, rate, shift = self.params
            return {"name": self.name, "amp": amp, "rate": rate, "shift": shift}
        if self.is_sampled:
            return {"grid": self.grid.tolist(), "values": self.values.tolist()}
        return {"name": self.name, **{k: v for k, v in self.meta.items() if isinstance(v, (int, float, str))}}


SEMICONCAVE_SLACK = 1e-6


def _quotients(f, r, direction, steps):
    fr = f(r)
    return np.array([(f(r + direction * h) - fr) / (direction * h) for h in steps])


def _check_monotone(q, r):
    d = np.diff(q)
    if d.size == 0:
        return
    increasing = np.all(d >= -SEMICONCAVE_SLACK)
    decreasing = np.all(d <= SEMICONCAVE_SLACK)
    if not (increasing or decreasing):
        raise NotSemiConcave(f"difference quotients at r={r} are not monotone in the step size")
    big = np.abs(d) > SEMICONCAVE_SLACK
    if big.sum() >= 3:
        ratios = np.abs(d[1:]) / np.maximum(np.abs(d[:-1]), 1e-300)
        if np.any(ratios[big[1:]] > 0.9):
            raise NotSemiConcave(f"difference quotients at r={r} do not converge")


def _richardson_quotient(f, r, direction, h0=1e-2, levels=10, tail=6):
    steps = h0 * 0.5 ** np.arange(levels)
    q = _quotients(f, r, direction, steps)
    # coarse steps may straddle a nearby kink; only the fine tail has to settle
    _check_monotone(q[-tail:], r)
    return float(2 * q[-1] - q[-2])


def _sampled_one_sided(f, r):
    g, v = f.grid, f.values
    h = f.spacing
    out = []
    for direction in (1.0, -1.0):
        steps = [h * 2.0 ** k for k in range(3)]
        steps = [s for s in steps if g[0] - 1e-12 <= r + direction * s <= g[-1] + 1e-12]
        if not steps:
            out.append(math.nan)
            continue
        q = _quotients(f, r, direction, steps)
        _check_monotone(q, r)
        out.append(float(2 * q[0] - q[1]) if q.size > 1 else float(q[0]))
    return out[0], out[1]
