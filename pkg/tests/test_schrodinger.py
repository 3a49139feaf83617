import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from warpcheck.errors import NeedsSmoothness, PreconditionFailed, SingularWeight
from warpcheck.fiber import FiberSpace, fiber_spectrum
from warpcheck.schrodinger import (
    assemble,
    heat_apply,
    limit_point_check,
    product_eigenvalue,
    resolved_eigenvalues,
    resolved_schrodinger_eigenvalues,
    schrodinger_potential,
    schrodinger_transform,
    spectrum,
    tensor_spectrum,
)
from warpcheck.warp import BaseSpace, WarpFunction

PI = math.pi
ONE = WarpFunction.catalog("const", 0.0)
SIN = WarpFunction.catalog("sin", 1.0)
CONE = WarpFunction.catalog("id", 0.0)
SEG = BaseSpace.interval(0, PI)

CATALOG = [
    ("sin", 1.0, SEG),
    ("id", 0.0, BaseSpace.halfline()),
    ("const", 0.0, SEG),
    ("sinh", -1.0, BaseSpace.halfline()),
    ("cosh", -1.0, BaseSpace.line()),
    ("exp", -1.0, BaseSpace.line()),
]


def neumann_cosine(k, h):
    # exact eigenvalues of the cell-centred Neumann second difference
    return 4 * np.sin(k * h / 2) ** 2 / h ** 2


# assembly -----------------------------------------------------------------

@pytest.mark.parametrize("N", [1.0, 2.0, 3.5])
def test_flat_operator_is_neumann_laplacian(N):
    op = assemble(SEG, ONE, N, 0.0, 200)
    ev = spectrum(op, 6).eigenvalues
    k = np.arange(6)
    assert np.allclose(ev, neumann_cosine(k, op.h), atol=1e-9)
    assert np.all(np.abs(ev - k ** 2) <= k ** 4 * op.h ** 2 / 12 + 1e-9)


@pytest.mark.parametrize("name,K,B", CATALOG)
def test_constants_are_harmonic(name, K, B):
    op = assemble(B, WarpFunction.catalog(name, K), 2.0, 0.0, 300)
    assert np.max(np.abs(op.apply(np.ones(300)))) < 1e-9
    assert np.max(np.abs(op.matrix() @ np.ones(300))) < 1e-9


def test_sin_self_convergence():
    ns = (100, 200, 400, 800)
    l1 = np.array([spectrum(assemble(SEG, SIN, 2.0, 0.0, n), 2).eigenvalues[1] for n in ns])
    ref = (4 * l1[-1] - l1[-2]) / 3
    err = np.abs(l1[:-1] - ref)
    assert np.all((err[:-1] / err[1:] > 3.5) & (err[:-1] / err[1:] < 4.5))
    # measure sin^2 dr is the radial part of the round 3-sphere, lambda_1 = 1 * 3
    assert abs(ref - 3.0) < 1e-6


def test_singular_weight():
    bump = WarpFunction.from_callable(lambda r: (np.asarray(r) - 1.0) ** 2, 0.0)
    with pytest.raises(SingularWeight):
        assemble(BaseSpace.interval(0, 2), bump, 2.0, 0.0, 101)


def test_negative_lambda_rejected():
    with pytest.raises(PreconditionFailed):
        assemble(SEG, ONE, 2.0, -1.0, 50)


def test_boundary_conditions():
    assert assemble(SEG, SIN, 2.0).bc == ("degenerate", "degenerate")
    assert assemble(SEG, ONE, 2.0).bc == ("neumann", "neumann")
    assert assemble(BaseSpace.halfline(), CONE, 2.0, far_bc="dirichlet").bc == ("degenerate", "dirichlet")
    assert assemble(BaseSpace.circle(), ONE, 2.0).periodic


# self-adjointness ---------------------------------------------------------

@pytest.mark.parametrize("name,K,B", CATALOG + [("const", 0.0, BaseSpace.circle())])
def test_weighted_symmetry_and_energy(name, K, B, rng):
    op = assemble(B, WarpFunction.catalog(name, K), 2.0, 1.5, 150)
    u, v = rng.standard_normal((2, 150))
    lhs, rhs = op.inner(op.apply(u), v), op.inner(u, op.apply(v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    energy = op.gradient_energy(u)
    assert abs(-op.inner(op.apply(u), u) - energy) <= 1e-12 * energy


def test_dirichlet_far_end_energy(rng):
    op = assemble(BaseSpace.line(), WarpFunction.catalog("cosh", -1.0), 2.0, 0.0, 100, far_bc="dirichlet")
    u = rng.standard_normal(100)
    energy = op.gradient_energy(u)
    assert abs(-op.inner(op.apply(u), u) - energy) <= 1e-12 * energy
    assert spectrum(op, 1).eigenvalues[0] > 1e-3


# Schrodinger conjugation --------------------------------------------------

def test_potential_cone_n2():
    r = np.linspace(0.1, 3.0, 30)
    for lam in (0.0, 1.01, 4.0):
        assert np.allclose(schrodinger_potential(CONE, 2.0, lam, r), lam / r ** 2, rtol=1e-14)


def test_potential_flat_is_lambda():
    r = np.linspace(-2, 2, 9)
    assert np.all(schrodinger_potential(ONE, 3.0, 2.5, r) == 2.5)


@pytest.mark.parametrize("N,lam", [(2.0, 0.0), (3.0, 0.0), (2.5, 1.7)])
def test_potential_sin_by_finite_differences(N, lam):
    r = np.linspace(0.3, 2.8, 26)
    e = 1e-4
    d1 = (np.sin(r + e) - np.sin(r - e)) / (2 * e)
    d2 = (np.sin(r + e) - 2 * np.sin(r) + np.sin(r - e)) / e ** 2
    ref = ((N * N - 2 * N) / 4 * d1 ** 2 + N / 2 * np.sin(r) * d2 + lam) / np.sin(r) ** 2
    assert np.allclose(schrodinger_potential(SIN, N, lam, r), ref, rtol=1e-6, atol=1e-7)


CONJUGATION = [
    ("const", 0.0, SEG, 2.0, 0.0),
    ("sin", 1.0, SEG, 2.0, 2.0),
    ("sin", 1.0, SEG, 3.0, 0.0),
    ("id", 0.0, BaseSpace.halfline(), 2.0, 2.0),
    ("cosh", -1.0, BaseSpace.line(), 2.0, 0.0),
    ("exp", -1.0, BaseSpace.line(), 2.0, 1.0),
    ("sinh", -1.0, BaseSpace.halfline(), 2.0, 3.0),
]


@pytest.mark.parametrize("name,K,B,N,lam", CONJUGATION)
def test_conjugation_preserves_spectrum(name, K, B, N, lam):
    f = WarpFunction.catalog(name, K)
    h = assemble(B, f, N, lam, 120).h
    a = resolved_eigenvalues(B, f, N, lam, 120, 5)
    b = resolved_schrodinger_eigenvalues(B, f, N, lam, 120, 5)
    assert np.max(np.abs(a - b)) <= 10 * h * h


def test_conjugation_raw_spectra_second_order():
    errs = []
    for n in (100, 200, 400):
        op = assemble(SEG, SIN, 2.0, 2.0, n)
        errs.append(np.max(np.abs(spectrum(op, 5).eigenvalues - schrodinger_transform(op).spectrum(5))))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_conjugation_boundary_kinds():
    form = schrodinger_transform(assemble(BaseSpace.halfline(), CONE, 2.0, 1.0, 100))
    assert form.bc[0] == ("dirichlet",) and form.bc[1][0] == "robin"
    assert form.degenerate_ends == (0.0,)
    flat = schrodinger_transform(assemble(SEG, ONE, 2.0, 0.0, 100))
    assert flat.bc == (("robin", 0.0), ("robin", 0.0))


def test_sampled_warp_needs_smoothing():
    r = np.linspace(0, PI, 50)
    f = WarpFunction.sampled(r, np.sin(r) + 1.0, 1.0)
    with pytest.raises(NeedsSmoothness):
        schrodinger_transform(assemble(SEG, f, 2.0, 0.0, 40))


# limit point --------------------------------------------------------------

def cone_form(N, lam, n=200):
    return schrodinger_transform(assemble(BaseSpace.halfline(), CONE, N, lam, n))


@pytest.mark.parametrize("lam,expected", [(1.01, True), (2.0, True), (10.0, True), (0.5, False), (0.74, False)])
def test_limit_point_cone_n2(lam, expected):
    assert limit_point_check(cone_form(2.0, lam), 0.0) is expected


def test_limit_point_cone_n3():
    # (N^2 - 2N)/4 = 3/4 already sits on the threshold, lambda tips it over
    assert limit_point_check(cone_form(3.0, 0.6), 0.0)


def test_limit_point_needs_degenerate_end():
    with pytest.raises(PreconditionFailed):
        limit_point_check(cone_form(2.0, 1.0), 5.0)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(1.0, 4.0))
def test_limit_point_monotone_in_lambda(a, b, N):
    lo, hi = sorted((a, b))
    if limit_point_check(cone_form(N, lo, 60), 0.0):
        assert limit_point_check(cone_form(N, hi, 60), 0.0)


# spectra ------------------------------------------------------------------

@pytest.mark.parametrize("name,K,B", CATALOG)
@pytest.mark.parametrize("N", [1.0, 2.0, 3.0])
def test_ground_state_is_constant(name, K, B, N):
    pairs = spectrum(assemble(B, WarpFunction.catalog(name, K), N, 0.0, 200), 3)
    assert abs(pairs.eigenvalues[0]) <= 1e-10
    v = pairs.eigenvectors[:, 0]
    assert np.ptp(v) <= 1e-8 * np.max(np.abs(v))


def test_eigenvectors_weighted_orthonormal():
    op = assemble(SEG, SIN, 3.0, 1.0, 200)
    V = spectrum(op, 6).eigenvectors
    assert np.allclose(V.T @ (op.mass[:, None] * V), np.eye(6), atol=1e-10)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_eigenvalues_monotone_in_lambda(a, b):
    lo, hi = sorted((a, b))
    e0 = spectrum(assemble(SEG, SIN, 2.0, lo, 100), 5).eigenvalues
    e1 = spectrum(assemble(SEG, SIN, 2.0, hi, 100), 5).eigenvalues
    assert np.all(e1 >= e0 - 1e-9 * np.maximum(1.0, e0))


def test_flat_shift_by_lambda():
    op = assemble(SEG, ONE, 2.0, 4.0, 200)
    ev = spectrum(op, 5).eigenvalues
    assert np.allclose(ev, neumann_cosine(np.arange(5), op.h) + 4.0, atol=1e-9)


def test_spectrum_k_range():
    op = assemble(SEG, ONE, 2.0, 0.0, 20)
    with pytest.raises(ValueError):
        spectrum(op, 19)


# heat semigroup -----------------------------------------------------------

def test_heat_small_time_is_identity():
    op = assemble(SEG, ONE, 2.0, 0.0, 200)
    u0 = np.cos(op.grid) + 0.3 * np.cos(2 * op.grid)
    assert np.max(np.abs(heat_apply(op, 1e-9, u0) - u0)) < 1e-8


def test_heat_on_eigenvector():
    op = assemble(SEG, SIN, 2.0, 1.0, 150)
    pairs = spectrum(op, 4)
    for k in range(4):
        e = pairs.eigenvectors[:, k]
        out = heat_apply(op, 0.3, e)
        assert np.allclose(out, np.exp(-0.3 * pairs.eigenvalues[k]) * e, atol=1e-10)


@given(st.floats(0.01, 5.0))
def test_heat_conserves_mass(t):
    op = assemble(SEG, SIN, 2.0, 0.0, 120)
    u0 = np.exp(-((op.grid - 1.0) ** 2) * 4)
    assert abs(op.inner(heat_apply(op, t, u0), np.ones(120)) - op.inner(u0, np.ones(120))) < 1e-8


def test_heat_rejects_nonpositive_time():
    op = assemble(SEG, ONE, 2.0, 0.0, 50)
    with pytest.raises(ValueError):
        heat_apply(op, 0.0, np.ones(50))


# product sectors ----------------------------------------------------------

def test_zero_sector_is_base_spectrum():
    ev = spectrum(assemble(SEG, SIN, 2.0, 0.0, 200), 4).eigenvalues
    for j in range(4):
        assert abs(product_eigenvalue(SEG, SIN, 2.0, 0.0, j, grid_n=200) - ev[j]) < 1e-10


def test_flat_sector_shift():
    for lam in (1.0, 4.0):
        base = spectrum(assemble(SEG, ONE, 2.0, 0.0, 200), 4).eigenvalues
        for j in range(4):
            assert abs(product_eigenvalue(SEG, ONE, 2.0, lam, j, grid_n=200) - (base[j] + lam)) < 1e-9


def test_suspension_sector_matches_tensor_solve():
    F = FiberSpace.circle(2 * PI)
    l1 = fiber_spectrum(F, 64, 2).eigenvalues[1]
    vals, vecs = tensor_spectrum(SEG, SIN, 2.0, F, 120, 64, 6)
    assert vecs.shape == (6, 120, 64)
    sector = product_eigenvalue(SEG, SIN, 2.0, l1, 0, grid_n=120)
    assert np.min(np.abs(vals - sector)) < 1e-3
    # the two circle modes of the first sector are degenerate
    assert np.sum(np.abs(vals - sector) < 1e-6) == 2
