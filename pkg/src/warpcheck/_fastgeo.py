"""Compiled kernels for bulk geodesic work on B x_f [0, L].

Only catalog warps are supported here; the kind codes follow
``KIND_CODES``.  Geodesics are integrated in arclength with state
(r, z, phi), where z is the fiber height and phi the angle from the base
direction, so that r' = cos phi, z' = sin phi / f, phi' = -f' sin phi / f.
"""

import heapq
import math

import numba
import numpy as np

KIND_CODES = {"sin": 0, "id": 1, "const": 2, "sinh": 3, "exp": 4, "cosh": 5}
F_FLOOR = 1e-10


@numba.njit(cache=True, nogil=True)
def warp_eval(kind, a, b, c, r):
    x = b * (r - c)
    if kind == 0:
        return a * math.sin(x), a * b * math.cos(x)
    if kind == 1:
        return a * x, a * b
    if kind == 2:
        return a, 0.0
    if kind == 3:
        return a * math.sinh(x), a * b * math.cosh(x)
    if kind == 4:
        e = math.exp(x)
        return a * e, a * b * e
    return a * math.cosh(x), a * b * math.sinh(x)


@numba.njit(cache=True, nogil=True)
def _rhs(kind, a, b, c, r, phi):
    f, fp = warp_eval(kind, a, b, c, r)
    s = math.sin(phi)
    return math.cos(phi), s / f, -fp * s / f, f


@numba.njit(cache=True, nogil=True)
def _rk4(kind, a, b, c, r, z, phi, ds):
    k1r, k1z, k1p, f1 = _rhs(kind, a, b, c, r, phi)
    k2r, k2z, k2p, f2 = _rhs(kind, a, b, c, r + 0.5 * ds * k1r, phi + 0.5 * ds * k1p)
    k3r, k3z, k3p, f3 = _rhs(kind, a, b, c, r + 0.5 * ds * k2r, phi + 0.5 * ds * k2p)
    k4r, k4z, k4p, f4 = _rhs(kind, a, b, c, r + ds * k3r, phi + ds * k3p)
    fmin = min(min(f1, f2), min(f3, f4))
    return (
        r + ds * (k1r + 2 * k2r + 2 * k3r + k4r) / 6,
        z + ds * (k1z + 2 * k2z + 2 * k3z + k4z) / 6,
        phi + ds * (k1p + 2 * k2p + 2 * k3p + k4p) / 6,
        fmin,
    )


@numba.njit(cache=True, nogil=True)
def _step(kind, a, b, c, r, ds, q):
    """ds, shortened near zeros of f where the ray turns on the scale f/|f'|."""
    f, fp = warp_eval(kind, a, b, c, r)
    if fp != 0.0 and f > 0.0:
        return min(ds, max(f / (abs(fp) * q), 1e-6 * ds))
    return ds


@numba.njit(cache=True, nogil=True)
def _fire(kind, a, b, c, r0, phi0, L, ds, maxsteps, lo, hi, q):
    """Integrate until the height reaches L, for at most maxsteps * ds of arclength.

    Returns (r, s, status): status 1 when the height was reached, 0 when
    the arclength budget ran out, -1 when f vanished or r left [lo, hi].
    On failure r is the last position reached; it continues r(phi) past
    the frontier well enough to keep sign changes for bracketing.
    """
    r, z, phi, s = r0, 0.0, phi0, 0.0
    smax = maxsteps * ds
    for _ in range(20 * maxsteps):
        if s >= smax:
            break
        h = _step(kind, a, b, c, r, ds, q)
        r1, z1, p1, fmin = _rk4(kind, a, b, c, r, z, phi, h)
        if not (fmin > F_FLOOR) or r1 < lo or r1 > hi or not math.isfinite(z1):
            return r, s, -1
        if z1 >= L:
            # Newton on the partial step length so that z hits L
            delta = h * (L - z) / (z1 - z)
            for _ in range(4):
                rr, zz, pp, fm = _rk4(kind, a, b, c, r, z, phi, delta)
                f, _fp = warp_eval(kind, a, b, c, rr)
                zdot = math.sin(pp) / f
                if zdot <= 0:
                    break
                delta += (L - zz) / zdot
            rr, zz, pp, fm = _rk4(kind, a, b, c, r, z, phi, delta)
            return rr, s + delta, 1
        r, z, phi, s = r1, z1, p1, s + h
    return r, s, 0


@numba.njit(cache=True, nogil=True)
def _walk(kind, a, b, c, r0, phi0, S, nsteps, q):
    """Position after arclength S along the ray."""
    ds = S / max(1, nsteps)
    r, z, phi, s = r0, 0.0, phi0, 0.0
    for _ in range(20 * max(1, nsteps)):
        if s >= S:
            break
        h = min(_step(kind, a, b, c, r, ds, q), S - s)
        r, z, phi, fmin = _rk4(kind, a, b, c, r, z, phi, h)
        s += h
    return r, z


@numba.njit(cache=True, nogil=True)
def shoot_pair(kind, a, b, c, r0, r1, L, lo, hi, nscan, nsteps):
    """Shortest smooth geodesic from (r0, 0) to (r1, L); returns (length, phi0, ok)."""
    if L <= 1e-15:
        return abs(r1 - r0), (0.0 if r1 >= r0 else math.pi), True
    f0, _ = warp_eval(kind, a, b, c, r0)
    f1, _ = warp_eval(kind, a, b, c, r1)
    bound = min(f0, f1) * L + abs(r1 - r0)
    ds = bound / nsteps
    # rays up to three times the trivial bound still help bracketing
    maxsteps = 3 * nsteps
    q = max(8.0, nsteps / 10.0)
    phis = np.empty(nscan)
    vals = np.empty(nscan)
    for j in range(nscan):
        phis[j] = math.pi * 0.5 * (1.0 - math.cos(math.pi * j / (nscan - 1)))
        rr, ss, st = _fire(kind, a, b, c, r0, phis[j], L, ds, maxsteps, lo, hi, q)
        vals[j] = rr - r1
    best, best_phi, found = math.inf, math.nan, False
    for j in range(nscan - 1):
        va, vb = vals[j], vals[j + 1]
        if not (math.isfinite(va) and math.isfinite(vb)) or va * vb > 0:
            continue
        pa, pb = phis[j], phis[j + 1]
        # Illinois variant of regula falsi
        side = 0
        pm = pa
        for _ in range(100):
            pm = (pa * vb - pb * va) / (vb - va) if vb != va else 0.5 * (pa + pb)
            if not (pa < pm < pb):
                pm = 0.5 * (pa + pb)
            rr, ss, st = _fire(kind, a, b, c, r0, pm, L, ds, maxsteps, lo, hi, q)
            vm = rr - r1
            if abs(vm) < 1e-13 or pb - pa < 1e-15:
                break
            if vm * vb > 0:
                pb, vb = pm, vm
                if side == -1:
                    va *= 0.5
                side = -1
            else:
                pa, va = pm, vm
                if side == 1:
                    vb *= 0.5
                side = 1
        rr, ss, st = _fire(kind, a, b, c, r0, pm, L, ds, maxsteps, lo, hi, q)
        if st == 1 and abs(rr - r1) < 1e-8 and ss < best:
            # rays grazing a zero of f can fake a hit at coarse steps
            r2, s2, st2 = _fire(kind, a, b, c, r0, pm, L, 0.5 * ds, 2 * maxsteps, lo, hi, 2 * q)
            if st2 == 1 and abs(r2 - r1) < 1e-4 * (1.0 + bound) and abs(s2 - ss) < 1e-4 * (1.0 + ss):
                best, best_phi, found = ss, pm, True
    return best, best_phi, found


@numba.njit(cache=True, nogil=True)
def _broken(r0, r1, zeros):
    best, zb = math.inf, math.nan
    for k in range(zeros.size):
        d = abs(r0 - zeros[k]) + abs(zeros[k] - r1)
        if d < best:
            best, zb = d, zeros[k]
    return best, zb


@numba.njit(cache=True, nogil=True)
def pair_point(kind, a, b, c, r0, r1, L, t, lo, hi, zeros, nscan, nsteps):
    """Point at fraction t along the shortest path; returns (r_t, z_t, length, mode).

    mode 0: smooth geodesic, 1: broken path through a zero of f, -1: failure.
    For broken paths z_t is 0 on the first leg and L on the second.
    """
    f0, _ = warp_eval(kind, a, b, c, r0)
    f1, _ = warp_eval(kind, a, b, c, r1)
    Leff = L if (f0 > F_FLOOR and f1 > F_FLOOR) else 0.0
    # near-radial rays are aimed near phi = 0 rather than phi = pi, where
    # doubles are too coarse to resolve the launch angle
    flip = r1 < r0
    ra, rb = (r1, r0) if flip else (r0, r1)
    length, phi0, ok = shoot_pair(kind, a, b, c, ra, rb, Leff, lo, hi, nscan, nsteps)
    bl, zb = _broken(r0, r1, zeros)
    if Leff == 0.0:
        ok = True
    if ok and length <= bl:
        if Leff == 0.0:
            return r0 + t * (r1 - r0), (0.0 if t < 1 else L), length, 0
        rt, zt = _walk(kind, a, b, c, ra, phi0, ((1.0 - t) if flip else t) * length, nsteps,
                       max(8.0, nsteps / 10.0))
        return rt, (L - zt if flip else zt), length, 0
    if math.isfinite(bl):
        s = t * bl
        d0 = abs(zb - r0)
        if s <= d0:
            frac = s / d0 if d0 > 0 else 0.0
            return r0 + frac * (zb - r0), 0.0, bl, 1
        d1 = bl - d0
        frac = (s - d0) / d1 if d1 > 0 else 1.0
        return zb + frac * (r1 - zb), L, bl, 1
    return math.nan, math.nan, math.nan, -1


@numba.njit(parallel=True, cache=True)
def batch_points(kind, a, b, c, r0, r1, L, t, lo, hi, zeros, nscan, nsteps):
    n = r0.size
    rt = np.empty(n)
    zt = np.empty(n)
    length = np.empty(n)
    mode = np.empty(n, dtype=np.int64)
    for i in numba.prange(n):
        rt[i], zt[i], length[i], mode[i] = pair_point(
            kind, a, b, c, r0[i], r1[i], L[i], t[i], lo, hi, zeros, nscan, nsteps
        )
    return rt, zt, length, mode


# grid Dijkstra ------------------------------------------------------------

STENCIL = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
     (1, 2), (1, -2), (-1, 2), (-1, -2), (2, 1), (2, -1), (-2, 1), (-2, -1)],
    dtype=np.int64,
)


@numba.njit(cache=True)
def grid_dijkstra(fhalf, hr, hz, nr, nz, src, dst):
    """Dijkstra on an nr x nz grid of B x [0, L] with a 16-neighbour stencil.

    ``fhalf[k]`` is f at r_lo + k hr / 2.  Edge lengths use Simpson's rule
    along the straight coordinate segment.  Returns (distance, predecessor).
    """
    n = nr * nz
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == dst:
            break
        i, j = u // nz, u % nz
        for k in range(STENCIL.shape[0]):
            di, dj = STENCIL[k, 0], STENCIL[k, 1]
            ii, jj = i + di, j + dj
            if ii < 0 or ii >= nr or jj < 0 or jj >= nz:
                continue
            v = ii * nz + jj
            if done[v]:
                continue
            dr = di * hr
            dz = dj * hz
            fa = fhalf[2 * i]
            fm = fhalf[2 * i + di]
            fb = fhalf[2 * ii]
            w = (math.sqrt(dr * dr + fa * fa * dz * dz)
                 + 4.0 * math.sqrt(dr * dr + fm * fm * dz * dz)
                 + math.sqrt(dr * dr + fb * fb * dz * dz)) / 6.0
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist[dst], pred
