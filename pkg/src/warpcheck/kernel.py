"""Generalized trigonometric functions and volume distortion coefficients.

All functions broadcast over numpy arrays.  Infinite distortion is returned
as IEEE ``inf``, which is a genuine extended-real value rather than a
large sentinel; callers test it with ``np.isinf``.
"""

from __future__ import annotations

import numpy as np

# below this |kappa * theta^2| the ratio sin_k(t theta)/sin_k(theta) is
# evaluated from its Taylor expansion
SERIES_CUTOFF = 1e-8


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def sin_kappa(kappa, s):
    """Solution of u'' + kappa u = 0 with u(0) = 0, u'(0) = 1, evaluated at s."""
    kappa, s = np.broadcast_arrays(np.asarray(kappa, float), np.asarray(s, float))
    out = np.empty(kappa.shape)
    z = kappa * s * s
    small = np.abs(z) < SERIES_CUTOFF
    pos = (kappa > 0) & ~small
    neg = (kappa < 0) & ~small
    out[small] = s[small] * (1.0 - z[small] / 6.0 + z[small] ** 2 / 120.0)
    w = np.sqrt(kappa[pos])
    out[pos] = np.sin(w * s[pos]) / w
    w = np.sqrt(-kappa[neg])
    out[neg] = np.sinh(w * s[neg]) / w
    return _scalar_or_array(out)


def cos_kappa(kappa, s):
    """Solution of u'' + kappa u = 0 with u(0) = 1, u'(0) = 0, evaluated at s."""
    kappa, s = np.broadcast_arrays(np.asarray(kappa, float), np.asarray(s, float))
    out = np.empty(kappa.shape)
    z = kappa * s * s
    small = np.abs(z) < SERIES_CUTOFF
    pos = (kappa > 0) & ~small
    neg = (kappa < 0) & ~small
    out[small] = 1.0 - z[small] / 2.0 + z[small] ** 2 / 24.0
    out[pos] = np.cos(np.sqrt(kappa[pos]) * s[pos])
    out[neg] = np.cosh(np.sqrt(-kappa[neg]) * s[neg])
    return _scalar_or_array(out)


def sigma_kappa(kappa, t, theta):
    """sin_k(t theta) / sin_k(theta), with the conventions at 0 and past the first zero.

    Returns ``t`` when kappa*theta^2 == 0 and ``inf`` once kappa*theta^2 >= pi^2.
    """
    kappa, t, theta = np.broadcast_arrays(
        np.asarray(kappa, float), np.asarray(t, float), np.asarray(theta, float)
    )
    z = kappa * theta * theta
    out = np.empty(z.shape)
    exact = z == 0.0
    series = ~exact & (np.abs(z) < SERIES_CUTOFF)
    blown = z >= np.pi ** 2
    general = ~(exact | series | blown)

    out[exact] = t[exact]
    ts, zs = t[series], z[series]
    out[series] = ts * (1.0 + zs * (1.0 - ts * ts) / 6.0)
    out[blown] = np.inf
    if general.any():
        k, tt, th = kappa[general], t[general], theta[general]
        out[general] = np.asarray(sin_kappa(k, tt * th)) / np.asarray(sin_kappa(k, th))
    return _scalar_or_array(out)


def sigma(K, N, t, theta):
    """Distortion coefficient sigma_{K,N}^{(t)}(theta) = sigma_{K/N}^{(t)}(theta)."""
    N = np.asarray(N, float)
    if np.any(N <= 0):
        raise ValueError("N must be positive")
    return sigma_kappa(np.asarray(K, float) / N, t, theta)


def tau(K, N, t, theta):
    """Distortion coefficient tau_{K,N}^{(t)}(theta) = (t sigma_{K,N-1}^{(t)}(theta)^{N-1})^{1/N}.

    For N = 1 the value is t when K <= 0 and inf when K > 0.
    """
    K, N, t, theta = np.broadcast_arrays(
        np.asarray(K, float), np.asarray(N, float), np.asarray(t, float), np.asarray(theta, float)
    )
    if np.any(N < 1):
        raise ValueError("N must be >= 1")
    out = np.empty(K.shape)
    one = N == 1.0
    out[one] = np.where(K[one] > 0, np.inf, t[one])
    rest = ~one
    if rest.any():
        n = N[rest]
        s = np.asarray(sigma_kappa(K[rest] / (n - 1.0), t[rest], theta[rest]), float)
        with np.errstate(over="ignore", invalid="ignore"):
            v = (t[rest] * s ** (n - 1.0)) ** (1.0 / n)
        # past the conjugate distance tau is infinite for every t, t = 0 included
        out[rest] = np.where(np.isinf(s), np.inf, v)
    return _scalar_or_array(out)
