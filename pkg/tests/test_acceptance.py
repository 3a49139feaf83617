"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line with its runtime; the lines are printed
in a summary section at the end of the pytest run.
"""

import math
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from warpcheck import bochner as bo
from warpcheck.analysis import pythagorean_residual
from warpcheck.cli import run
from warpcheck.fiber import FiberSpace, RCDAttestation, fiber_spectrum, lichnerowicz_check
from warpcheck.geometry import brunn_minkowski_check, random_product_set
from warpcheck.kernel import sigma, sigma_kappa, tau
from warpcheck.scenario import bundled, bundled_names
from warpcheck.schrodinger import (assemble, limit_point_check, resolved_eigenvalues,
                                   resolved_schrodinger_eigenvalues, schrodinger_transform, spectrum)
from warpcheck.verdict import classify_rcd
from warpcheck.warp import BaseSpace, WarpFunction

PI = math.pi
EPS = np.finfo(float).eps

MODELS = [
    ("sin", 1.0, 1.0, BaseSpace.interval(0, PI)),
    ("id", 0.0, 1.0, BaseSpace.halfline()),
    ("const", 0.0, 0.0, BaseSpace.line()),
    ("sinh", -1.0, 1.0, BaseSpace.halfline()),
    ("exp", -1.0, 0.0, BaseSpace.line()),
    ("cosh", -1.0, -1.0, BaseSpace.line()),
]

TRUTH_TABLE = {
    "spherical-suspension": ("Thm6_iff", "RCD(2,3)"),
    "euclidean-cone": ("Thm6_iff", "RCD(0,3)"),
    "cartesian-product": ("Thm6_iff", "RCD(0,2)"),
    "elliptic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "hyperbolic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "parabolic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "example-1.2": ("Thm2_item4", "RCD(-2,4)"),
    "concavity-violating": ("Thm1_sufficient", "Inconclusive"),
    "boundary-violating": ("Thm1_sufficient", "Inconclusive"),
    "under-attested": ("Thm1_sufficient", "Inconclusive"),
    "affine-non-model": ("Thm6_iff", "RCD(2,3)"),
    "kf-negative-necessity": ("Thm2_item4", "RCD(-2,3)"),
}


def test_pythagorean_identity(criterion):
    with criterion(1, "Pythagorean identity on the six model warps", 1.0):
        for name, K, K_F, B in MODELS:
            assert pythagorean_residual(B, WarpFunction.catalog(name, K), K_F) <= 1e-10, name


def test_distortion_coefficients(criterion):
    with criterion(2, "distortion coefficients at their defining special cases", 1.0):
        t = np.linspace(0, 1, 101)
        for kappa in (-3.0, -0.5, 0.0, 0.5, 3.0):
            assert np.array_equal(sigma_kappa(kappa, t, 0.0), t)
            assert np.array_equal(sigma(kappa, 2.0, t, 0.0), t)
        for K in (-3.0, -1.0, 0.0):
            for theta in (0.1, 1.0, 5.0):
                assert np.array_equal(tau(K, 1.0, t, theta), t)
        assert tau(-3.0, 1.0, 0.4, 1.0) == 0.4
        assert np.all(np.isinf(tau(1.0, 1.0, t, 1.0)))
        for N in (1.5, 2.0, 3.0, 7.0):
            for theta in (0.0, 0.3, 2.0, 10.0):
                assert np.all(np.abs(tau(0.0, N, t, theta) - t) <= 4 * EPS * t)


@pytest.mark.parametrize("name", ["spherical-suspension", "euclidean-cone"])
def test_geodesic_invariants(criterion, name):
    with criterion(3, "Clairaut drift and grid-oracle distance (suspension, cone)", 60.0):
        rep = run("geodesic", bundled(name), 0)
        res = rep.results
        assert not rep.errors
        assert -res["geodesic.clairaut_drift"]["margin"] <= 1e-6
        assert -res["geodesic.oracle"]["margin"] <= 1e-3
        assert res["geodesic.oracle"]["parameters"]["oracle_n"] == 2049


def test_limit_point(criterion):
    with criterion(4, "limit-point predicate for f(r) = r, N = 2", 1.0):
        f = WarpFunction.catalog("id", 0.0)
        for lam, expected in ((1.01, True), (2.0, True), (10.0, True), (0.5, False), (0.74, False)):
            form = schrodinger_transform(assemble(BaseSpace.halfline(), f, 2.0, lam, 400))
            assert np.allclose(form.potential, lam / form.grid ** 2, rtol=1e-14)
            assert limit_point_check(form, 0.0) is expected, lam


def test_spectral(criterion):
    with criterion(5, "ground state and Lichnerowicz margin", 30.0):
        for name, K, _, B in MODELS:
            for N in (1.0, 2.0, 3.0):
                pairs = spectrum(assemble(B, WarpFunction.catalog(name, K), N, 0.0, 400), 2)
                assert abs(pairs.eigenvalues[0]) <= 1e-10, (name, N)
                v = pairs.eigenvectors[:, 0]
                assert np.ptp(v) <= 1e-8 * np.max(np.abs(v))
        for N in (2.0, 3.0):
            F = FiberSpace.interval(PI, N - 1, "sin", rcd=RCDAttestation(N - 1, N))
            res = lichnerowicz_check(fiber_spectrum(F, 400, 3), 1.0, N)
            assert res.margin >= -1e-2, N


CONJUGATION = [
    ("sin", 1.0, BaseSpace.interval(0, PI), 2.0, 2.0),
    ("sin", 1.0, BaseSpace.interval(0, PI), 3.0, 0.0),
    ("id", 0.0, BaseSpace.halfline(), 2.0, 2.0),
    ("sinh", -1.0, BaseSpace.halfline(), 2.0, 3.0),
    ("cosh", -1.0, BaseSpace.line(), 2.0, 0.0),
    ("exp", -1.0, BaseSpace.line(), 2.0, 1.0),
    ("const", 0.0, BaseSpace.interval(0, PI), 2.0, 0.0),
]


def test_schrodinger_conjugation(criterion):
    with criterion(6, "operator and Schrodinger spectra agree within 10 h^2", 30.0):
        for name, K, B, N, lam in CONJUGATION:
            f = WarpFunction.catalog(name, K)
            h = assemble(B, f, N, lam, 200).h
            a = resolved_eigenvalues(B, f, N, lam, 200, 5)
            b = resolved_schrodinger_eigenvalues(B, f, N, lam, 200, 5)
            assert np.max(np.abs(a - b)) <= 10 * h * h, name


def _bochner_setup(s):
    W = s.product()
    lo, hi = W.B.window(s.grid["truncation_R"])
    win = s.checks.get("bochner_window")
    center, width = win if win else (0.5 * (lo + hi), 0.3 * (hi - lo))
    return W, lo, hi, bo.window_weight(W, center, width)


def test_gamma2_decomposition(criterion):
    with criterion(7, "Gamma_2 terms vs direct oracle and BE margins", 120.0):
        rng = np.random.default_rng(7)
        for name in ("spherical-suspension", "euclidean-cone"):
            s = bundled(name)
            W, lo, hi, phi = _bochner_setup(s)
            n, nf, R = s.grid["base_n"], s.grid["fiber_n"], s.grid["truncation_R"]
            Bop, h = bo.base_operator(W, n, R)
            x = bo.fiber_op(W, nf).x
            for _ in range(20):
                u = bo.random_separable(W, rng, lo, hi)
                rep = bo.gamma2_terms(W, u, phi, n, nf, R)
                assert abs(rep.total - bo.direct_for(W, u, phi, Bop.x, x)[0]) <= 50 * h, name
        covered = 0
        for name in bundled_names():
            s = bundled(name)
            W = s.product()
            if W.F.kind == "finite":
                continue
            v = classify_rcd(W.B, W.f, W.N, W.F, assume_product_rcd=s.assume_product_rcd)
            if v.conclusion is None or v.conclusion.subject != "product":
                continue
            covered += 1
            W, lo, hi, phi = _bochner_setup(s)
            n, nf, R = s.grid["base_n"], s.grid["fiber_n"], s.grid["truncation_R"]
            for _ in range(20):
                rep = bo.gamma2_terms(W, bo.random_separable(W, rng, lo, hi), phi, n, nf, R)
                assert bo.be_inequality(rep, W.K, W.N) >= -50 * rep.h, name
        assert covered >= 6


def test_dimension_identity_and_base_reduction(criterion):
    with criterion(8, "dimension identity and constant-fiber reduction", 5.0):
        rng = np.random.default_rng(8)
        a, b = rng.normal(size=(2, 10_000)) * 10
        N = rng.uniform(0.1, 20.0, 10_000)
        lhs, rhs = bo.dimension_identity(a, b, N)
        assert np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))) <= 1e-12
        for name in ("spherical-suspension", "euclidean-cone", "cartesian-product"):
            s = bundled(name)
            W, lo, hi, phi = _bochner_setup(s)
            n, nf, R = s.grid["base_n"], s.grid["fiber_n"], s.grid["truncation_R"]
            u1 = bo.random_separable(W, rng, lo, hi).u1
            u = bo.TensorFunction(u1, lambda x: np.ones_like(np.asarray(x, float)))
            rep = bo.gamma2_terms(W, u, phi, n, nf, R)
            Fop = bo.fiber_op(W, nf)
            one_d = bo.bochner_1d(W, u1, phi.u1, n, R) * float(np.sum(Fop.mass * phi.u2(Fop.x)))
            assert abs(rep.total - one_d) <= 1e-10 * max(1.0, abs(one_d)), name


def test_brunn_minkowski_and_mcp(criterion):
    with criterion(9, "Brunn-Minkowski and MCP margins (product, cone, suspension)", 120.0):
        for name in ("cartesian-product", "euclidean-cone", "spherical-suspension"):
            s = bundled(name)
            for command in ("brunn-minkowski", "mcp"):
                rep = run(command, s, 0)
                assert not rep.errors and not rep.skipped, (name, command)
                for key, r in rep.results.items():
                    assert r["margin"] >= -r["tolerance"], (name, key, r["margin"])
            W = s.product()
            A = random_product_set(W, np.random.default_rng(9), R=s.grid["truncation_R"])
            assert brunn_minkowski_check(W, A, A, 0.5, 10, 10).margin >= 0, name


def test_verdict_truth_table(criterion):
    with criterion(10, "verdict truth table over the 12 bundled scenarios", 5.0):
        assert sorted(bundled_names()) == sorted(TRUTH_TABLE)
        for name, expected in TRUTH_TABLE.items():
            params = run("classify", bundled(name), 0).results["classify.verdict"]["parameters"]
            assert (params["route"], params["conclusion"]) == expected, name


def _cli():
    exe = shutil.which("warpcheck")
    return [exe] if exe else [sys.executable, "-m", "warpcheck.cli"]


def test_determinism_across_threads(criterion, tmp_path):
    with criterion(11, "byte-identical reports across 1, 2 and 8 threads"):
        outputs = []
        for threads in (1, 2, 8):
            out = tmp_path / f"t{threads}"
            env = dict(os.environ, WARPCHECK_THREADS=str(threads))
            proc = subprocess.run(
                _cli() + ["all", "--scenario", "spherical-suspension", "--seed", "0",
                          "--out", str(out), "--grid-scale", "0.5"],
                env=env, capture_output=True, text=True, timeout=900,
            )
            assert proc.returncode == 0, proc.stdout + proc.stderr
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert "spherical-suspension-all.json" in outputs[0]
        assert outputs[0] == outputs[1] == outputs[2]
